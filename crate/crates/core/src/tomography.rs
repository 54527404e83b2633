//! Single-qubit state inference from conditional detection statistics.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{c, standard_unitaries, CMat, CVec, ObservableSpec};
use crate::noise::{derive_seed, DesignState, NoiseModel};
use crate::probability::{estimate_with, DetectionStats, ProbabilityError};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

/// Fewest detections per basis for which an expectation is reported.
pub const MIN_DETECTIONS: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("basis {basis} produced only {detections} detections (need {MIN_DETECTIONS})")]
    InsufficientDetections { basis: &'static str, detections: u64 },
    #[error("tomography is defined for a single qubit, got dimension {0}")]
    NotQubit(usize),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
}

/// A Pauli expectation estimated from conditional detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expectation {
    pub value: f64,
    pub stderr: f64,
    pub detections: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferredState {
    pub exp_x: Expectation,
    pub exp_y: Expectation,
    pub exp_z: Expectation,
    pub rho_tilde: CMat,
}

impl InferredState {
    pub fn from_expectations(exp_x: Expectation, exp_y: Expectation, exp_z: Expectation) -> Self {
        Self {
            rho_tilde: rho_from_bloch(exp_x.value, exp_y.value, exp_z.value),
            exp_x,
            exp_y,
            exp_z,
        }
    }
}

/// `(I + xX + yY + zZ)/2`.
pub fn rho_from_bloch(x: f64, y: f64, z: f64) -> CMat {
    CMat::from_rows(&[
        &[c(0.5 * (1.0 + z), 0.0), c(0.5 * x, -0.5 * y)],
        &[c(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z), 0.0)],
    ])
    .expect("2×2 literal")
}

fn pauli_observables() -> [(&'static str, ObservableSpec); 3] {
    let su = standard_unitaries();
    let spec =
        |u: &CMat, op: &CMat| ObservableSpec::from_operator(u.clone(), op).expect("fixed Pauli bases diagonalize");
    [
        ("X", spec(&su.h, &su.x)),
        ("Y", spec(&su.v, &su.y)),
        ("Z", spec(&su.i, &su.z)),
    ]
}

fn expectation(
    basis: &'static str,
    stats: &DetectionStats,
    obs: &ObservableSpec,
) -> Result<Expectation, TomographyError> {
    let detections = stats.detections();
    if detections < MIN_DETECTIONS {
        return Err(TomographyError::InsufficientDetections { basis, detections });
    }
    let (value, stderr) = stats.weighted_mean(obs.eigenvalues())?;
    Ok(Expectation {
        value,
        stderr,
        detections,
    })
}

/// Estimates `⟨X⟩, ⟨Y⟩, ⟨Z⟩` on independent ensembles and assembles `ρ̃`.
pub fn infer_state(
    alpha: &CVec,
    s: f64,
    model: &NoiseModel,
    gamma: f64,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<InferredState, TomographyError> {
    if alpha.dim() != 2 {
        return Err(TomographyError::NotQubit(alpha.dim()));
    }
    let state = DesignState::new(alpha.clone(), s).map_err(ProbabilityError::from)?;
    let mut out = Vec::with_capacity(3);
    for (lane, (name, obs)) in pauli_observables().iter().enumerate() {
        let stats = estimate_with(
            &state,
            model,
            gamma,
            Some(obs),
            trials,
            derive_seed(seed, lane as u64 + 1),
            runner,
        )?;
        out.push(expectation(name, &stats, obs)?);
    }
    Ok(InferredState::from_expectations(out[0], out[1], out[2]))
}

/// Measurement of `B₊ = -(X+Z)/√2` on `|0⟩` where the model's statistics
/// differ from the quantum prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BplusReport {
    pub p1: f64,
    pub p2: f64,
    pub p_stderr: f64,
    pub expectation: f64,
    pub expectation_stderr: f64,
    pub detections: u64,
    pub trials: u64,
    pub quantum_reference: f64,
}

pub fn bplus_counterexample(trials: u64, seed: u64, runner: &Runner) -> Result<BplusReport, TomographyError> {
    let su = standard_unitaries();
    let obs = ObservableSpec::from_operator(su.w_plus.clone(), &su.b_plus).expect("W₊ diagonalizes B₊");
    let sigma = 1.0;
    let model = NoiseModel::sphere(sigma, 2).map_err(ProbabilityError::from)?;
    let state = DesignState::new(CVec::basis(2, 0), (2f64.sqrt() - 1.0) * sigma).map_err(ProbabilityError::from)?;
    let stats = estimate_with(&state, &model, sigma, Some(&obs), trials, seed, runner)?;
    let e = expectation("B+", &stats, &obs)?;
    let p = stats.conditional()?;
    let p_stderr = stats.conditional_stderr()?[0];
    Ok(BplusReport {
        p1: p[0],
        p2: p[1],
        p_stderr,
        expectation: e.value,
        expectation_stderr: e.stderr,
        detections: e.detections,
        trials,
        quantum_reference: -std::f64::consts::FRAC_1_SQRT_2,
    })
}

/// Report combining a state inference with the `B₊` comparison.
pub fn tomography_report(
    trials: u64,
    state: &InferredState,
    expected: Option<[f64; 3]>,
    bplus: &BplusReport,
) -> Report {
    let mut r = Report::new("tomography").with_params(vec![("trials", trials.into())]);
    let mut t = Table::new("expectations", &["observable", "value", "stderr", "detections"]);
    for (name, e) in [("X", &state.exp_x), ("Y", &state.exp_y), ("Z", &state.exp_z)] {
        t.push(vec![name.into(), e.value.into(), e.stderr.into(), e.detections.into()]);
    }
    r.tables.push(t);
    let mut t = Table::new("rho_tilde", &["row", "col", "re", "im"]);
    for i in 0..2 {
        for j in 0..2 {
            let z = state.rho_tilde.get(i, j);
            t.push(vec![(i + 1).into(), (j + 1).into(), z.re.into(), z.im.into()]);
        }
    }
    r.tables.push(t);
    let mut t = Table::new("bplus", &["quantity", "value", "stderr"]);
    t.push(vec!["p1".into(), bplus.p1.into(), bplus.p_stderr.into()]);
    t.push(vec!["p2".into(), bplus.p2.into(), bplus.p_stderr.into()]);
    t.push(vec![
        "expectation".into(),
        bplus.expectation.into(),
        bplus.expectation_stderr.into(),
    ]);
    t.push(vec![
        "quantum_reference".into(),
        bplus.quantum_reference.into(),
        0.0.into(),
    ]);
    r.tables.push(t);

    if let Some(exp) = expected {
        let got = [state.exp_x.value, state.exp_y.value, state.exp_z.value];
        let worst = got.iter().zip(exp).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
        r.checks.push(Check::new(
            "inferred expectations match the design state within 0.01",
            worst <= 0.01,
            format!("max deviation {worst:.4}"),
        ));
    }
    let gap = (bplus.expectation - bplus.quantum_reference).abs() / bplus.expectation_stderr;
    r.checks.push(Check::new(
        "B+ expectation differs from the quantum value by more than 10 standard errors",
        gap > 10.0,
        format!(
            "E = {:.4} ± {:.4}, quantum {:.4}",
            bplus.expectation, bplus.expectation_stderr, bplus.quantum_reference
        ),
    ));
    r
}

/// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a pure qubit state.
pub fn bloch_vector(alpha: &CVec) -> [f64; 3] {
    let (a, b) = (alpha[0], alpha[1]);
    let ab = a.conj() * b;
    [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
}
