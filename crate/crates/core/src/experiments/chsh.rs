//! CHSH correlations from conditional detections, measured jointly on the
//! two-qubit amplitude vector or locally by two separated parties.

use num_complex::Complex64;

use crate::detection::{measure_projective_slice, DetectionOutcome, SubspacePartition};
use crate::linalg::{standard_unitaries, tensor, verify_diagonalization, CMat, ObservableSpec};
use crate::noise::{derive_seed, DesignState, NoiseKind, NoiseModel, RngStream};
use crate::probability::{estimate_with, inverse_sqrt, DetectionStats};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

use super::{bell_state, exact_regime_signal, require_trials, ExperimentError};

/// Tsirelson's bound `2√2`, the largest quantum value of S.
pub const QUANTUM_S: f64 = 2.0 * std::f64::consts::SQRT_2;

pub const PAIR_LABELS: [&str; 4] = ["AB", "AB'", "A'B", "A'B'"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshParams {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub s: f64,
    pub gamma: f64,
}

impl ChshParams {
    /// Sphere-normalized noise in the exact regime.
    pub fn sphere() -> Self {
        Self {
            kind: NoiseKind::SphereNormalized,
            sigma: 1.0,
            s: exact_regime_signal(1.0),
            gamma: 1.0,
        }
    }

    /// Gaussian noise with `s = σ`, `γ = 3σ`.
    pub fn gaussian() -> Self {
        Self {
            kind: NoiseKind::GaussianIid,
            sigma: 1.0,
            s: 1.0,
            gamma: 3.0,
        }
    }

    /// Defaults for a noise family: the joint-measurement settings above.
    pub fn for_kind(kind: NoiseKind) -> Self {
        match kind {
            NoiseKind::GaussianIid => Self::gaussian(),
            _ => Self { kind, ..Self::sphere() },
        }
    }

    /// The local experiment keeps the exact-regime `s` and `γ` for every
    /// noise family, so only the noise distribution changes.
    pub fn local_for_kind(kind: NoiseKind) -> Self {
        Self { kind, ..Self::sphere() }
    }

    fn state(&self) -> Result<(DesignState, NoiseModel), ExperimentError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ExperimentError::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok((
            DesignState::new(bell_state(), self.s)?,
            NoiseModel::new(self.kind, self.sigma, 4)?,
        ))
    }
}

/// `S = |E₁ + E₂| + |E₃ − E₄|`.
pub fn chsh_s(e: [f64; 4]) -> f64 {
    (e[0] + e[1]).abs() + (e[2] - e[3]).abs()
}

/// A diagonalizing unitary together with its operator.
pub type Setting = (CMat, CMat);

/// Operators `A = Z⊗I`, `A′ = X⊗I`, `B = I⊗B₊`, `B′ = I⊗B₋` with their
/// diagonalizing unitaries, as `(A, A′)` and `(B, B′)` lists.
pub fn local_observables() -> ([Setting; 2], [Setting; 2]) {
    let su = standard_unitaries();
    let alice = [
        (tensor(&su.i, &su.i), tensor(&su.z, &su.i)),
        (tensor(&su.h, &su.i), tensor(&su.x, &su.i)),
    ];
    let bob = [
        (tensor(&su.i, &su.w_plus), tensor(&su.i, &su.b_plus)),
        (tensor(&su.i, &su.w_minus), tensor(&su.i, &su.b_minus)),
    ];
    (alice, bob)
}

fn pair_indices(k: usize) -> (usize, usize) {
    (k / 2, k % 2)
}

/// Joint observables `AB, AB′, A′B, A′B′` diagonalized by
/// `U_A ⊗ U_B` with eigenvalues computed from the operators.
pub fn joint_observables() -> Result<[ObservableSpec; 4], ExperimentError> {
    let (alice, bob) = local_observables();
    let mk = |k: usize| -> Result<ObservableSpec, ExperimentError> {
        let (i, j) = pair_indices(k);
        let u = tensor(&standard_local(i, true), &standard_local(j, false));
        let op = &alice[i].1 * &bob[j].1;
        Ok(ObservableSpec::from_operator(u, &op)?)
    };
    Ok([mk(0)?, mk(1)?, mk(2)?, mk(3)?])
}

/// Single-qubit factor of the joint unitary: `I` or `H` for Alice,
/// `W₊` or `W₋` for Bob.
fn standard_local(k: usize, alice: bool) -> CMat {
    let su = standard_unitaries();
    match (alice, k) {
        (true, 0) => su.i.clone(),
        (true, _) => su.h.clone(),
        (false, 0) => su.w_plus.clone(),
        (false, _) => su.w_minus.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointRow {
    pub label: &'static str,
    pub eigenvalues: Vec<f64>,
    pub stats: DetectionStats,
}

impl JointRow {
    pub fn n(&self) -> u64 {
        self.stats.detections()
    }

    pub fn mean(&self) -> f64 {
        self.stats.weighted_mean(&self.eigenvalues).map_or(f64::NAN, |m| m.0)
    }

    /// Binomial standard error of the mean.
    pub fn stderr(&self) -> f64 {
        self.stats.weighted_mean(&self.eigenvalues).map_or(f64::NAN, |m| m.1)
    }

    pub fn detection_fraction(&self) -> f64 {
        self.n() as f64 / self.stats.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshJointRun {
    pub params: ChshParams,
    pub trials: u64,
    pub rows: Vec<JointRow>,
}

/// Each observable is measured on its own independent ensemble.
pub fn run_chsh_joint(
    params: ChshParams,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<ChshJointRun, ExperimentError> {
    require_trials(trials)?;
    let (state, model) = params.state()?;
    let mut rows = Vec::new();
    for (k, obs) in joint_observables()?.iter().enumerate() {
        let stats = estimate_with(
            &state,
            &model,
            params.gamma,
            Some(obs),
            trials,
            derive_seed(seed, k as u64),
            runner,
        )?;
        rows.push(JointRow {
            label: PAIR_LABELS[k],
            eigenvalues: obs.eigenvalues().to_vec(),
            stats,
        });
    }
    Ok(ChshJointRun { params, trials, rows })
}

/// Summary shared by both CHSH variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSummary {
    pub means: [f64; 4],
    pub s: f64,
    /// Sum of the four `1/√n_i` terms.
    pub s_err: f64,
    /// Quadrature sum of the binomial standard errors of the means.
    pub s_stderr: f64,
}

impl ChshSummary {
    fn from_parts(means: [f64; 4], ns: [u64; 4], stderrs: [f64; 4]) -> Self {
        Self {
            means,
            s: chsh_s(means),
            s_err: ns.iter().map(|&n| inverse_sqrt(n)).sum(),
            s_stderr: stderrs.iter().map(|e| e * e).sum::<f64>().sqrt(),
        }
    }

    /// Number of standard errors by which S exceeds 2.
    pub fn violation_sigmas(&self) -> f64 {
        (self.s - 2.0) / self.s_stderr
    }
}

impl ChshJointRun {
    pub fn summary(&self) -> ChshSummary {
        let f = |g: &dyn Fn(&JointRow) -> f64| [g(&self.rows[0]), g(&self.rows[1]), g(&self.rows[2]), g(&self.rows[3])];
        let ns = [self.rows[0].n(), self.rows[1].n(), self.rows[2].n(), self.rows[3].n()];
        ChshSummary::from_parts(f(&|r| r.mean()), ns, f(&|r| r.stderr()))
    }

    pub fn checks(&self) -> Vec<Check> {
        let sm = self.summary();
        let mut out = vec![Check::new(
            "S exceeds 2 by at least 10 standard errors",
            sm.violation_sigmas() >= 10.0,
            format!(
                "S = {:.4} ± {:.4} (stderr {:.4}, {:.1}σ)",
                sm.s,
                sm.s_err,
                sm.s_stderr,
                sm.violation_sigmas()
            ),
        )];
        if self.params.kind == NoiseKind::SphereNormalized {
            out.push(Check::new(
                "S exceeds 2√2",
                sm.s > QUANTUM_S,
                format!("S = {:.4}, 2√2 = {:.4}", sm.s, QUANTUM_S),
            ));
        }
        out
    }

    pub fn report(&self) -> Report {
        let p = &self.params;
        let sm = self.summary();
        let mut r = Report::new("chsh-joint").with_params(vec![
            ("trials", self.trials.into()),
            ("noise", p.kind.name().into()),
            ("sigma", p.sigma.into()),
            ("s", p.s.into()),
            ("gamma", p.gamma.into()),
        ]);
        let mut t = Table::new(
            "observables",
            &[
                "observable",
                "n_i1",
                "n_i2",
                "n_i3",
                "n_i4",
                "n_i",
                "mean",
                "mean_err",
                "mean_stderr",
                "detection_fraction",
            ],
        );
        for row in &self.rows {
            let c = &row.stats.counts;
            t.push(vec![
                row.label.into(),
                c[0].into(),
                c[1].into(),
                c[2].into(),
                c[3].into(),
                row.n().into(),
                row.mean().into(),
                inverse_sqrt(row.n()).into(),
                row.stderr().into(),
                row.detection_fraction().into(),
            ]);
        }
        r.tables.push(t);
        r.tables.push(summary_table(&sm));
        r.checks = self.checks();
        r
    }
}

fn summary_table(sm: &ChshSummary) -> Table {
    let mut t = Table::new("summary", &["quantity", "value"]);
    t.push(vec!["S_D".into(), sm.s.into()]);
    t.push(vec!["S_D_err".into(), sm.s_err.into()]);
    t.push(vec!["S_D_stderr".into(), sm.s_stderr.into()]);
    t.push(vec!["S_Q".into(), QUANTUM_S.into()]);
    t
}

/// Tally layout for one local pair.
const L_ALICE: usize = 0;
const L_BOB: usize = 1;
const L_EITHER: usize = 2;
/// Outcome cells ↑↑, ↑↓, ↓↑, ↓↓ start here.
const L_CELLS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalRow {
    pub alice: &'static str,
    pub bob: &'static str,
    /// Coincidence counts ↑↑, ↑↓, ↓↑, ↓↓ (↑ is +1).
    pub cells: [u64; 4],
    pub alice_singles: u64,
    pub bob_singles: u64,
    /// Trials where at least one side had a single detection.
    pub either: u64,
    pub trials: u64,
}

impl LocalRow {
    pub fn coincidences(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let n = self.coincidences();
        if n == 0 {
            return f64::NAN;
        }
        let c = self.cells.map(|x| x as f64);
        (c[0] - c[1] - c[2] + c[3]) / n as f64
    }

    pub fn stderr(&self) -> f64 {
        let m = self.mean();
        ((1.0 - m * m).max(0.0) / self.coincidences() as f64).sqrt()
    }

    /// Coincidences per trial with a single detection on either side.
    pub fn eta(&self) -> f64 {
        self.coincidences() as f64 / self.either as f64
    }

    pub fn coincidence_fraction(&self) -> f64 {
        self.coincidences() as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshLocalRun {
    pub params: ChshParams,
    pub trials: u64,
    pub rows: Vec<LocalRow>,
}

/// Alice and Bob each measure the same realization with their own
/// subspace partition; a fresh ensemble is drawn for every setting pair.
pub fn run_chsh_local(
    params: ChshParams,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<ChshLocalRun, ExperimentError> {
    require_trials(trials)?;
    let (state, model) = params.state()?;
    let (alice, bob) = local_observables();
    let setup = |(u, op): &(CMat, CMat)| -> Result<(CMat, SubspacePartition), ExperimentError> {
        let eig = verify_diagonalization(u, op)?;
        Ok((u.clone(), SubspacePartition::from_eigenvalues(&eig)))
    };
    let alice = [setup(&alice[0])?, setup(&alice[1])?];
    let bob = [setup(&bob[0])?, setup(&bob[1])?];
    let gamma = params.gamma;
    let mut rows = Vec::new();
    for k in 0..4 {
        let (i, j) = pair_indices(k);
        let (ua, pa) = &alice[i];
        let (ub, pb) = &bob[j];
        let lane = derive_seed(seed, k as u64);
        let tally = runner.tally(
            trials,
            || vec![0u64; L_CELLS + 4],
            |t, acc| {
                let mut rng = RngStream::new(lane, t).rng();
                let mut a = [Complex64::new(0.0, 0.0); 4];
                state.realize_into(&model, &mut rng, &mut a);
                let oa = measure_projective_slice(&a, ua, pa, gamma);
                let ob = measure_projective_slice(&a, ub, pb, gamma);
                let (da, db) = (oa.is_detected(), ob.is_detected());
                acc[L_ALICE] += da as u64;
                acc[L_BOB] += db as u64;
                acc[L_EITHER] += (da || db) as u64;
                if let (
                    DetectionOutcome::Detected { value: Some(va), .. },
                    DetectionOutcome::Detected { value: Some(vb), .. },
                ) = (oa, ob)
                {
                    let cell = 2 * (va < 0.0) as usize + (vb < 0.0) as usize;
                    acc[L_CELLS + cell] += 1;
                }
            },
        );
        let cells = [
            tally[L_CELLS],
            tally[L_CELLS + 1],
            tally[L_CELLS + 2],
            tally[L_CELLS + 3],
        ];
        rows.push(LocalRow {
            alice: ["A", "A'"][i],
            bob: ["B", "B'"][j],
            cells,
            alice_singles: tally[L_ALICE],
            bob_singles: tally[L_BOB],
            either: tally[L_EITHER],
            trials,
        });
    }
    Ok(ChshLocalRun { params, trials, rows })
}

impl ChshLocalRun {
    pub fn summary(&self) -> ChshSummary {
        let r = &self.rows;
        ChshSummary::from_parts(
            [r[0].mean(), r[1].mean(), r[2].mean(), r[3].mean()],
            [
                r[0].coincidences(),
                r[1].coincidences(),
                r[2].coincidences(),
                r[3].coincidences(),
            ],
            [r[0].stderr(), r[1].stderr(), r[2].stderr(), r[3].stderr()],
        )
    }

    /// Pooled efficiency over the four setting pairs.
    pub fn eta(&self) -> f64 {
        let c: u64 = self.rows.iter().map(|r| r.coincidences()).sum();
        let e: u64 = self.rows.iter().map(|r| r.either).sum();
        c as f64 / e as f64
    }

    pub fn coincidence_fraction(&self) -> f64 {
        let c: u64 = self.rows.iter().map(|r| r.coincidences()).sum();
        c as f64 / (4 * self.trials) as f64
    }

    pub fn checks(&self) -> Vec<Check> {
        let sm = self.summary();
        let detail = format!("S = {:.4} ± {:.4} (stderr {:.4})", sm.s, sm.s_err, sm.s_stderr);
        if self.params.kind == NoiseKind::SphereNormalized {
            vec![Check::new(
                "S exceeds 2 by at least 10 standard errors",
                sm.violation_sigmas() >= 10.0,
                detail,
            )]
        } else {
            vec![Check::new(
                "no violation: S ≤ 2 + 3 standard errors",
                sm.s <= 2.0 + 3.0 * sm.s_stderr,
                detail,
            )]
        }
    }

    pub fn report(&self) -> Report {
        let p = &self.params;
        let sm = self.summary();
        let mut r = Report::new("chsh-local").with_params(vec![
            ("trials", self.trials.into()),
            ("noise", p.kind.name().into()),
            ("sigma", p.sigma.into()),
            ("s", p.s.into()),
            ("gamma", p.gamma.into()),
        ]);
        let mut t = Table::new(
            "coincidences",
            &[
                "pair",
                "alice",
                "bob",
                "up_up",
                "up_down",
                "down_up",
                "down_down",
                "total",
                "mean",
                "mean_err",
                "mean_stderr",
            ],
        );
        for row in &self.rows {
            t.push(vec![
                format!("{}{}", row.alice, row.bob).into(),
                row.alice.into(),
                row.bob.into(),
                row.cells[0].into(),
                row.cells[1].into(),
                row.cells[2].into(),
                row.cells[3].into(),
                row.coincidences().into(),
                row.mean().into(),
                inverse_sqrt(row.coincidences()).into(),
                row.stderr().into(),
            ]);
        }
        r.tables.push(t);
        let mut t = Table::new(
            "efficiency",
            &[
                "pair",
                "alice_singles",
                "bob_singles",
                "either_single",
                "coincidences",
                "coincidence_fraction",
                "either_fraction",
                "eta",
            ],
        );
        for row in &self.rows {
            t.push(vec![
                format!("{}{}", row.alice, row.bob).into(),
                row.alice_singles.into(),
                row.bob_singles.into(),
                row.either.into(),
                row.coincidences().into(),
                row.coincidence_fraction().into(),
                (row.either as f64 / row.trials as f64).into(),
                row.eta().into(),
            ]);
        }
        r.tables.push(t);
        let mut t = summary_table(&sm);
        t.push(vec!["eta".into(), self.eta().into()]);
        t.push(vec!["coincidence_fraction".into(), self.coincidence_fraction().into()]);
        r.tables.push(t);
        r.checks = self.checks();
        r
    }
}
