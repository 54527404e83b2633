//! Mermin–Peres magic square under threshold detection.
//!
//! Each row and column is a context of three commuting two-qubit
//! observables sharing one eigenbasis. A single detection in that basis
//! assigns all three values at once, so the product constraints hold
//! exactly on every detected trial; contextuality shows up instead as the
//! impossibility of one realization being detected in all six contexts.

use num_complex::Complex64;

use crate::detection::{measure_triple_slice, TripleOutcome};
use crate::linalg::{standard_unitaries, tensor, verify_diagonalization, CMat, CVec};
use crate::noise::{derive_seed, random_state, DesignState, NoiseKind, NoiseModel, RngStream};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

use super::{exact_regime_signal, require_trials, ExperimentError};

pub const CONTEXT_NAMES: [&str; 6] = ["R1", "R2", "R3", "C1", "C2", "C3"];

/// Full-scale run sizes: 2¹⁶ random states with 2²⁰ realizations each.
pub const FULL_SCALE_STATES: u64 = 1 << 16;
pub const FULL_SCALE_TRIALS: u64 = 1 << 20;
/// Desk-scale defaults.
pub const DEFAULT_STATES: u64 = 1 << 8;
pub const DEFAULT_TRIALS: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct MagicContext {
    pub name: &'static str,
    pub unitary: CMat,
    /// Eigenvalue of each of the three observables per basis column.
    pub signs: [Vec<f64>; 3],
    pub expected_product: f64,
}

/// The six contexts with eigenvalues computed from the operators.
pub fn magic_contexts() -> Result<Vec<MagicContext>, ExperimentError> {
    let su = standard_unitaries();
    let (i, x, y, z) = (&su.i, &su.x, &su.y, &su.z);
    let ops: [(&str, &CMat, [CMat; 3]); 6] = [
        ("R1", &su.u_r1, [tensor(x, i), tensor(i, x), tensor(x, x)]),
        ("R2", &su.u_r2, [tensor(i, y), tensor(y, i), tensor(y, y)]),
        ("R3", &su.u_r3, [tensor(x, y), tensor(y, x), tensor(z, z)]),
        ("C1", &su.u_c1, [tensor(x, i), tensor(i, y), tensor(x, y)]),
        ("C2", &su.u_c2, [tensor(i, x), tensor(y, i), tensor(y, x)]),
        ("C3", &su.u_c3, [tensor(x, x), tensor(y, y), tensor(z, z)]),
    ];
    let mut out = Vec::new();
    for (name, u, triple) in ops {
        let [a, b, c] = &triple;
        let signs = [
            verify_diagonalization(u, a)?,
            verify_diagonalization(u, b)?,
            verify_diagonalization(u, c)?,
        ];
        let product = &(a * b) * c;
        let expected_product = if product.max_abs_diff(&CMat::identity(4))? < 1e-12 {
            1.0
        } else {
            -1.0
        };
        out.push(MagicContext {
            name,
            unitary: u.clone(),
            signs,
            expected_product,
        });
    }
    Ok(out)
}

/// Measures all six contexts on one amplitude vector.
pub fn replay(a: &CVec, gamma: f64) -> Result<Vec<TripleOutcome>, ExperimentError> {
    if a.dim() != 4 {
        return Err(crate::linalg::LinalgError::DimensionMismatch(4, a.dim()).into());
    }
    Ok(magic_contexts()?
        .iter()
        .map(|c| measure_triple_slice(a.as_slice(), &c.unitary, &c.signs, gamma))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagicParams {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub s: f64,
    pub gamma: f64,
}

impl Default for MagicParams {
    fn default() -> Self {
        Self {
            kind: NoiseKind::SphereNormalized,
            sigma: 1.0,
            s: exact_regime_signal(1.0),
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContextTally {
    pub detections: u64,
    pub violations: u64,
    pub no_detection: u64,
    pub multiple: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagicSquareRun {
    pub params: MagicParams,
    pub num_states: u64,
    pub trials_per_state: u64,
    pub contexts: Vec<ContextTally>,
    /// Trials detected in every row context.
    pub all_rows: u64,
    /// Trials detected in every column context.
    pub all_columns: u64,
    /// Trials detected in all six contexts; contextuality forces zero.
    pub six_way: u64,
}

const PER_CONTEXT: usize = 4;
const T_ROWS: usize = 6 * PER_CONTEXT;

/// Random design states, one per state index.
pub fn random_states(num_states: u64, seed: u64) -> Vec<CVec> {
    let lane = derive_seed(seed, 0);
    (0..num_states)
        .map(|k| random_state(&mut RngStream::new(lane, k).rng(), 4))
        .collect()
}

fn noise_lane(seed: u64, state: u64) -> u64 {
    derive_seed(derive_seed(seed, 1), state)
}

pub fn run_magic_square(
    params: MagicParams,
    num_states: u64,
    trials_per_state: u64,
    seed: u64,
    runner: &Runner,
) -> Result<MagicSquareRun, ExperimentError> {
    require_trials(num_states)?;
    require_trials(trials_per_state)?;
    let total = num_states
        .checked_mul(trials_per_state)
        .ok_or_else(|| ExperimentError::InvalidParameter("states × trials overflows".into()))?;
    let contexts = magic_contexts()?;
    let model = NoiseModel::new(params.kind, params.sigma, 4)?;
    let states = random_states(num_states, seed)
        .into_iter()
        .map(|alpha| DesignState::new(alpha, params.s))
        .collect::<Result<Vec<_>, _>>()?;
    let lanes: Vec<u64> = (0..num_states).map(|k| noise_lane(seed, k)).collect();
    let gamma = params.gamma;

    let tally = runner.tally(
        total,
        || vec![0u64; T_ROWS + 3],
        |i, acc| {
            let (k, t) = (i / trials_per_state, i % trials_per_state);
            let mut rng = RngStream::new(lanes[k as usize], t).rng();
            let mut a = [Complex64::new(0.0, 0.0); 4];
            states[k as usize].realize_into(&model, &mut rng, &mut a);
            let mut detected = [false; 6];
            for (c, ctx) in contexts.iter().enumerate() {
                let slot = c * PER_CONTEXT;
                match measure_triple_slice(&a, &ctx.unitary, &ctx.signs, gamma) {
                    TripleOutcome::Detected { values, .. } => {
                        detected[c] = true;
                        acc[slot] += 1;
                        if values[0] * values[1] * values[2] != ctx.expected_product {
                            acc[slot + 1] += 1;
                        }
                    }
                    TripleOutcome::NoDetection => acc[slot + 2] += 1,
                    TripleOutcome::MultipleDetections => acc[slot + 3] += 1,
                }
            }
            let rows = detected[..3].iter().all(|&d| d);
            let cols = detected[3..].iter().all(|&d| d);
            acc[T_ROWS] += rows as u64;
            acc[T_ROWS + 1] += cols as u64;
            acc[T_ROWS + 2] += (rows && cols) as u64;
        },
    );

    let contexts = (0..6)
        .map(|c| {
            let s = &tally[c * PER_CONTEXT..(c + 1) * PER_CONTEXT];
            ContextTally {
                detections: s[0],
                violations: s[1],
                no_detection: s[2],
                multiple: s[3],
            }
        })
        .collect();
    Ok(MagicSquareRun {
        params,
        num_states,
        trials_per_state,
        contexts,
        all_rows: tally[T_ROWS],
        all_columns: tally[T_ROWS + 1],
        six_way: tally[T_ROWS + 2],
    })
}

impl MagicSquareRun {
    pub fn violation_count(&self) -> u64 {
        self.contexts.iter().map(|c| c.violations).sum()
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::new(
                "product constraints hold on every detected context",
                self.violation_count() == 0,
                format!(
                    "{} violations over {} detected contexts",
                    self.violation_count(),
                    self.contexts.iter().map(|c| c.detections).sum::<u64>()
                ),
            ),
            Check::new(
                "no realization is detected in all six contexts",
                self.six_way == 0,
                format!("six-way intersection size {}", self.six_way),
            ),
        ]
    }

    pub fn report(&self) -> Report {
        let p = &self.params;
        let mut r = Report::new("magic-square").with_params(vec![
            ("states", self.num_states.into()),
            ("trials_per_state", self.trials_per_state.into()),
            ("noise", p.kind.name().into()),
            ("sigma", p.sigma.into()),
            ("s", p.s.into()),
            ("gamma", p.gamma.into()),
        ]);
        let mut t = Table::new(
            "contexts",
            &[
                "context",
                "expected_product",
                "detections",
                "violations",
                "no_detection",
                "multiple",
                "detection_fraction",
            ],
        );
        let total = (self.num_states * self.trials_per_state) as f64;
        for (name, c) in CONTEXT_NAMES.iter().zip(&self.contexts) {
            let expected: i64 = if *name == "C3" { -1 } else { 1 };
            t.push(vec![
                (*name).into(),
                expected.into(),
                c.detections.into(),
                c.violations.into(),
                c.no_detection.into(),
                c.multiple.into(),
                (c.detections as f64 / total).into(),
            ]);
        }
        r.tables.push(t);
        let mut t = Table::new("intersections", &["set", "count"]);
        t.push(vec!["R1∩R2∩R3".into(), self.all_rows.into()]);
        t.push(vec!["C1∩C2∩C3".into(), self.all_columns.into()]);
        t.push(vec!["all six".into(), self.six_way.into()]);
        r.tables.push(t);
        r.checks = self.checks();
        r
    }
}

/// Trial-level record for one design state: which trials each context
/// detected and the three values it assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct MagicSquareDetail {
    pub alpha: CVec,
    pub trials: u64,
    /// Per context, the detected trial indices and their value triples.
    pub index_sets: Vec<Vec<(u64, [f64; 3])>>,
}

impl MagicSquareDetail {
    pub fn indices(&self, context: usize) -> Vec<u64> {
        self.index_sets[context].iter().map(|(i, _)| *i).collect()
    }

    /// Indices present in every one of `contexts`.
    pub fn intersection(&self, contexts: &[usize]) -> Vec<u64> {
        let mut out = self.indices(contexts[0]);
        for &c in &contexts[1..] {
            let other = self.indices(c);
            out.retain(|i| other.binary_search(i).is_ok());
        }
        out
    }
}

pub fn magic_square_detail(
    alpha: &CVec,
    params: MagicParams,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<MagicSquareDetail, ExperimentError> {
    require_trials(trials)?;
    let contexts = magic_contexts()?;
    let model = NoiseModel::new(params.kind, params.sigma, 4)?;
    let state = DesignState::new(alpha.clone(), params.s)?;
    let outcomes: Vec<Vec<TripleOutcome>> = runner.map(trials, |t| {
        let a = state
            .realize(&model, RngStream::new(seed, t))
            .expect("dimensions checked above");
        contexts
            .iter()
            .map(|c| measure_triple_slice(a.as_slice(), &c.unitary, &c.signs, params.gamma))
            .collect()
    });
    let mut index_sets = vec![Vec::new(); 6];
    for (t, row) in outcomes.iter().enumerate() {
        for (c, o) in row.iter().enumerate() {
            if let Some(v) = o.values() {
                index_sets[c].push((t as u64, v));
            }
        }
    }
    Ok(MagicSquareDetail {
        alpha: alpha.clone(),
        trials,
        index_sets,
    })
}

/// Report for replayed amplitude vectors.
pub fn replay_report(vectors: &[CVec], gamma: f64) -> Result<Report, ExperimentError> {
    let mut r = Report::new("magic-square").with_params(vec![
        ("replayed_vectors", vectors.len().into()),
        ("gamma", gamma.into()),
    ]);
    let mut t = Table::new("replay", &["vector", "context", "outcome", "g1", "g2", "g3", "product"]);
    let mut ok = true;
    let contexts = magic_contexts()?;
    for (v, a) in vectors.iter().enumerate() {
        for (ctx, o) in contexts.iter().zip(replay(a, gamma)?) {
            let label = match o {
                TripleOutcome::Detected { index, .. } => format!("#{}", index + 1),
                TripleOutcome::NoDetection => "none".into(),
                TripleOutcome::MultipleDetections => "multiple".into(),
            };
            let g = o.values().unwrap_or([f64::NAN; 3]);
            let prod = o.product().unwrap_or(f64::NAN);
            if o.product().is_some_and(|p| p != ctx.expected_product) {
                ok = false;
            }
            t.push(vec![
                (v + 1).into(),
                ctx.name.into(),
                label.into(),
                g[0].into(),
                g[1].into(),
                g[2].into(),
                prod.into(),
            ]);
        }
    }
    r.tables.push(t);
    r.checks.push(Check::new(
        "product constraints hold on replayed vectors",
        ok,
        format!("{} vectors", vectors.len()),
    ));
    Ok(r)
}
