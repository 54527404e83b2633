//! Threshold-crossing measurement.
//!
//! A component (or subspace) "crosses" when its amplitude is strictly above
//! the threshold γ. A measurement yields an outcome only when exactly one
//! component crosses; zero or several crossings are kept as distinct
//! non-outcomes so the multiple-detection rate stays observable.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{CMat, CVec, LinalgError, ObservableSpec};

/// Largest dimension handled without heap allocation in the hot paths.
const STACK_DIM: usize = 16;

/// Relative guard on `γ²` so that amplitudes equal to γ up to rounding
/// (e.g. `|σe^{iθ}|` with `γ = σ`) do not count as crossings.
pub const CROSSING_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("index {0} is outside 0..{1}")]
    OutOfRange(usize, usize),
    #[error("index {0} appears in more than one group")]
    Overlap(usize),
    #[error("index {0} is not covered by any group")]
    Uncovered(usize),
    #[error("{groups} groups but {values} values")]
    ValueCount { groups: usize, values: usize },
    #[error("empty group at position {0}")]
    EmptyGroup(usize),
}

/// Result of one measurement on one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum DetectionOutcome {
    /// Exactly one crossing, at zero-based `index`; `value` is the attached
    /// eigenvalue when the measurement came from an observable.
    Detected {
        index: usize,
        value: Option<f64>,
    },
    NoDetection,
    MultipleDetections,
}

impl DetectionOutcome {
    pub fn is_detected(&self) -> bool {
        matches!(self, DetectionOutcome::Detected { .. })
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            DetectionOutcome::Detected { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            DetectionOutcome::Detected { value, .. } => value,
            _ => None,
        }
    }

    /// Label used in reports: the eigenvalue, or `NaN` for any non-outcome.
    pub fn label(&self) -> String {
        match *self {
            DetectionOutcome::Detected { value: Some(v), .. } => format!("{v:+}"),
            DetectionOutcome::Detected { index, .. } => format!("#{}", index + 1),
            _ => "NaN".to_string(),
        }
    }
}

/// Classifies amplitudes against a threshold.
#[inline]
fn single_crossing<I: IntoIterator<Item = f64>>(amplitudes: I, gamma: f64) -> DetectionOutcome {
    let mut hit = None;
    for (i, amp) in amplitudes.into_iter().enumerate() {
        if amp > gamma {
            if hit.is_some() {
                return DetectionOutcome::MultipleDetections;
            }
            hit = Some(i);
        }
    }
    match hit {
        Some(index) => DetectionOutcome::Detected { index, value: None },
        None => DetectionOutcome::NoDetection,
    }
}

/// Standard-basis measurement: outcome `n` iff `|a_n| > γ` and no other
/// component crosses.
pub fn measure_standard(a: &CVec, gamma: f64) -> DetectionOutcome {
    measure_slice(a.as_slice(), gamma)
}

#[inline]
pub fn measure_slice(a: &[Complex64], gamma: f64) -> DetectionOutcome {
    // compare squared magnitudes; γ ≥ 0 so the ordering is preserved
    let g2 = gamma * gamma * (1.0 + CROSSING_REL_TOL);
    single_crossing(a.iter().map(|z| z.norm_sqr()), g2)
}

fn with_rotated<T>(a: &[Complex64], u: &CMat, f: impl FnOnce(&[Complex64]) -> T) -> T {
    let n = a.len();
    if n <= STACK_DIM {
        let mut buf = [Complex64::new(0.0, 0.0); STACK_DIM];
        u.adjoint_mul_vec_into(a, &mut buf[..n])
            .expect("dimensions checked by caller");
        f(&buf[..n])
    } else {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        u.adjoint_mul_vec_into(a, &mut buf)
            .expect("dimensions checked by caller");
        f(&buf)
    }
}

fn check_dims(expected: usize, got: usize) -> Result<(), LinalgError> {
    if expected != got {
        return Err(LinalgError::DimensionMismatch(expected, got));
    }
    Ok(())
}

/// Measures the observable: standard measurement of `U†a`, with the
/// detected component's eigenvalue attached.
pub fn measure_observable(a: &CVec, obs: &ObservableSpec, gamma: f64) -> Result<DetectionOutcome, LinalgError> {
    check_dims(obs.dim(), a.dim())?;
    Ok(measure_observable_slice(a.as_slice(), obs, gamma))
}

#[inline]
pub fn measure_observable_slice(a: &[Complex64], obs: &ObservableSpec, gamma: f64) -> DetectionOutcome {
    let outcome = with_rotated(a, obs.unitary(), |b| measure_slice(b, gamma));
    match outcome {
        DetectionOutcome::Detected { index, .. } => DetectionOutcome::Detected {
            index,
            value: Some(obs.eigenvalues()[index]),
        },
        other => other,
    }
}

/// Disjoint groups of basis indices (zero-based) covering `0..dim`, each
/// with an eigenvalue. Group `m` is the projector `Π_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePartition {
    dim: usize,
    groups: Vec<Vec<usize>>,
    values: Vec<f64>,
    group_of: Vec<usize>,
}

impl SubspacePartition {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>, values: Vec<f64>) -> Result<Self, PartitionError> {
        if groups.len() != values.len() {
            return Err(PartitionError::ValueCount {
                groups: groups.len(),
                values: values.len(),
            });
        }
        let mut group_of = vec![usize::MAX; dim];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(PartitionError::EmptyGroup(g));
            }
            for &i in members {
                if i >= dim {
                    return Err(PartitionError::OutOfRange(i, dim));
                }
                if group_of[i] != usize::MAX {
                    return Err(PartitionError::Overlap(i));
                }
                group_of[i] = g;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(PartitionError::Uncovered(i));
        }
        Ok(Self {
            dim,
            groups,
            values,
            group_of,
        })
    }

    /// Groups basis indices by equal eigenvalue, in order of first
    /// appearance. Eigenvalues closer than 1e-9 are treated as equal.
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Self {
        let mut values: Vec<f64> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, &v) in eigenvalues.iter().enumerate() {
            match values.iter().position(|&u| (u - v).abs() < 1e-9) {
                Some(g) => groups[g].push(i),
                None => {
                    values.push(v);
                    groups.push(vec![i]);
                }
            }
        }
        Self::new(eigenvalues.len(), groups, values).expect("grouping is a partition")
    }

    /// One singleton group per basis index.
    pub fn singletons(values: &[f64]) -> Self {
        let groups = (0..values.len()).map(|i| vec![i]).collect();
        Self::new(values.len(), groups, values.to_vec()).expect("singletons partition")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `‖Π_m b‖²` for every group.
    pub fn group_norms_sqr(&self, b: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.groups.len()];
        for (i, z) in b.iter().enumerate() {
            out[self.group_of[i]] += z.norm_sqr();
        }
        out
    }

    fn classify(&self, b: &[Complex64], gamma: f64) -> DetectionOutcome {
        let g2 = gamma * gamma * (1.0 + CROSSING_REL_TOL);
        let outcome = if self.groups.len() <= STACK_DIM {
            let mut acc = [0.0f64; STACK_DIM];
            for (i, z) in b.iter().enumerate() {
                acc[self.group_of[i]] += z.norm_sqr();
            }
            single_crossing(acc[..self.groups.len()].iter().copied(), g2)
        } else {
            single_crossing(self.group_norms_sqr(b), g2)
        };
        match outcome {
            DetectionOutcome::Detected { index, .. } => DetectionOutcome::Detected {
                index,
                value: Some(self.values[index]),
            },
            other => other,
        }
    }
}

/// Projective measurement: `b = U†a`, then a single crossing of the group
/// amplitudes `‖Π_m b‖`.
pub fn measure_projective(
    a: &CVec,
    u: &CMat,
    part: &SubspacePartition,
    gamma: f64,
) -> Result<DetectionOutcome, LinalgError> {
    check_dims(u.dim(), a.dim())?;
    check_dims(part.dim(), a.dim())?;
    Ok(measure_projective_slice(a.as_slice(), u, part, gamma))
}

#[inline]
pub fn measure_projective_slice(a: &[Complex64], u: &CMat, part: &SubspacePartition, gamma: f64) -> DetectionOutcome {
    with_rotated(a, u, |b| part.classify(b, gamma))
}

/// Outcome of measuring three commuting observables that share one
/// diagonalizing unitary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum TripleOutcome {
    Detected { index: usize, values: [f64; 3] },
    NoDetection,
    MultipleDetections,
}

impl TripleOutcome {
    pub fn values(&self) -> Option<[f64; 3]> {
        match *self {
            TripleOutcome::Detected { values, .. } => Some(values),
            _ => None,
        }
    }

    pub fn product(&self) -> Option<f64> {
        self.values().map(|v| v[0] * v[1] * v[2])
    }
}

/// Measures a whole row or column of commuting observables from one shared
/// evaluation of `U†a`. `signs[k]` is the diagonal of `U†A_kU`.
pub fn measure_triple(a: &CVec, u: &CMat, signs: &[Vec<f64>; 3], gamma: f64) -> Result<TripleOutcome, LinalgError> {
    check_dims(u.dim(), a.dim())?;
    for s in signs {
        check_dims(u.dim(), s.len())?;
    }
    Ok(measure_triple_slice(a.as_slice(), u, signs, gamma))
}

#[inline]
pub fn measure_triple_slice(a: &[Complex64], u: &CMat, signs: &[Vec<f64>; 3], gamma: f64) -> TripleOutcome {
    match with_rotated(a, u, |b| measure_slice(b, gamma)) {
        DetectionOutcome::Detected { index, .. } => TripleOutcome::Detected {
            index,
            values: [signs[0][index], signs[1][index], signs[2][index]],
        },
        DetectionOutcome::NoDetection => TripleOutcome::NoDetection,
        DetectionOutcome::MultipleDetections => TripleOutcome::MultipleDetections,
    }
}
