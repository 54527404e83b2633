//! Deterministic parallel reduction over trial indices.
//!
//! Each trial writes into an integer tally; tallies merge by addition, so
//! the result is independent of the worker count and of scheduling.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Per-trial accumulator that can be merged in any order.
pub trait Tally: Send {
    fn merge(&mut self, other: Self);
}

impl Tally for Vec<u64> {
    fn merge(&mut self, other: Self) {
        if self.len() < other.len() {
            self.resize(other.len(), 0);
        }
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
}

impl Tally for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

/// Runs trials on a dedicated pool of `workers` threads, or on rayon's
/// global pool when no count was given.
#[derive(Clone, Default)]
pub struct Runner {
    pool: Option<Arc<ThreadPool>>,
}

impl std::fmt::Debug for Runner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runner").field("workers", &self.workers()).finish()
    }
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self, ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn workers(&self) -> usize {
        match &self.pool {
            Some(p) => p.current_num_threads(),
            None => rayon::current_num_threads(),
        }
    }

    /// Folds `per_trial(index, &mut tally)` over `0..trials`.
    pub fn tally<T, I, F>(&self, trials: u64, init: I, per_trial: F) -> T
    where
        T: Tally,
        I: Fn() -> T + Sync + Send,
        F: Fn(u64, &mut T) + Sync + Send,
    {
        let work = || {
            (0..trials)
                .into_par_iter()
                .fold(&init, |mut acc, i| {
                    per_trial(i, &mut acc);
                    acc
                })
                .reduce(&init, |mut a, b| {
                    a.merge(b);
                    a
                })
        };
        match &self.pool {
            Some(p) => p.install(work),
            None => work(),
        }
    }

    /// Ordered map over `0..count`; output order is the index order.
    pub fn map<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let work = || (0..count).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(p) => p.install(work),
            None => work(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_is_independent_of_workers() {
        let count = |r: &Runner| {
            r.tally(
                100_000,
                || vec![0u64; 7],
                |i, acc: &mut Vec<u64>| acc[(i.wrapping_mul(2654435761) % 7) as usize] += 1,
            )
        };
        let one = count(&Runner::new(1).unwrap());
        let four = count(&Runner::new(4).unwrap());
        assert_eq!(one, four);
        assert_eq!(one.iter().sum::<u64>(), 100_000);
    }

    #[test]
    fn map_preserves_order() {
        let r = Runner::new(3).unwrap();
        let v = r.map(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(k, &x)| x == 2 * k as u64));
    }
}
