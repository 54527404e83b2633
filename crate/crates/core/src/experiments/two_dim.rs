//! Two-dimensional examples with hand-built noise families.

use crate::linalg::CVec;
use crate::noise::{derive_seed, DesignState, NoiseKind, NoiseModel};
use crate::probability::{estimate_with, DetectionStats};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

use super::{exact_regime_signal, require_trials, ExperimentError};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDimCase {
    pub label: &'static str,
    pub kind: NoiseKind,
    pub alpha: CVec,
    pub s: f64,
    pub gamma: f64,
    pub stats: DetectionStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDimRun {
    pub sigma: f64,
    pub trials: u64,
    pub cases: Vec<TwoDimCase>,
}

/// The four configurations: a single random phase on the empty component,
/// anti-correlated phases on an equal superposition near `s = σ`, and
/// Bloch-uniform noise on `|0⟩` and on the equal superposition.
fn configurations(sigma: f64) -> Vec<(&'static str, NoiseKind, CVec, f64)> {
    let plus = CVec::from_real(&[1.0, 1.0]).normalized();
    let s0 = exact_regime_signal(sigma);
    vec![
        ("single-phase", NoiseKind::SinglePhase, CVec::basis(2, 0), 1.1 * sigma),
        (
            "anti-correlated-phase",
            NoiseKind::AntiCorrelatedPhase,
            plus.clone(),
            1.001 * sigma,
        ),
        ("bloch-basis", NoiseKind::BlochUniform, CVec::basis(2, 0), s0),
        ("bloch-superposition", NoiseKind::BlochUniform, plus, s0),
    ]
}

pub fn run_two_dim_examples(trials: u64, seed: u64, runner: &Runner) -> Result<TwoDimRun, ExperimentError> {
    require_trials(trials)?;
    let sigma = 1.0;
    let gamma = sigma;
    let mut cases = Vec::new();
    for (lane, (label, kind, alpha, s)) in configurations(sigma).into_iter().enumerate() {
        let model = NoiseModel::new(kind, sigma, 2)?;
        let state = DesignState::new(alpha.clone(), s)?;
        let stats = estimate_with(
            &state,
            &model,
            gamma,
            None,
            trials,
            derive_seed(seed, lane as u64),
            runner,
        )?;
        cases.push(TwoDimCase {
            label,
            kind,
            alpha,
            s,
            gamma,
            stats,
        });
    }
    Ok(TwoDimRun { sigma, trials, cases })
}

impl TwoDimRun {
    fn case(&self, label: &str) -> &TwoDimCase {
        self.cases.iter().find(|c| c.label == label).expect("fixed case labels")
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();

        let c = &self.case("single-phase").stats;
        out.push(Check::new(
            "single-phase: P1 = 1 exactly",
            c.counts == [c.trials, 0] && c.no_detection == 0 && c.multiple == 0,
            format!(
                "counts {:?}, none {}, multiple {}",
                c.counts, c.no_detection, c.multiple
            ),
        ));

        let c = &self.case("anti-correlated-phase").stats;
        let p = c.p_single();
        let se = c.rate_stderr(0.5);
        out.push(Check::new(
            "anti-correlated-phase: P1 ≈ P2 ≈ 1/2, P0 = 0, P∞ ≈ 0",
            c.no_detection == 0
                && c.p_multiple() < 0.01
                && (p[0] - 0.5).abs() < 0.01 + 5.0 * se
                && (p[1] - 0.5).abs() < 0.01 + 5.0 * se,
            format!("P1 {:.4}, P2 {:.4}, P∞ {:.4}", p[0], p[1], c.p_multiple()),
        ));

        let c = &self.case("bloch-basis").stats;
        out.push(Check::new(
            "bloch-basis: P1 > 0, P2 = 0, P∞ = 0",
            c.counts[0] > 0 && c.counts[1] == 0 && c.multiple == 0,
            format!("counts {:?}, multiple {}", c.counts, c.multiple),
        ));

        let c = &self.case("bloch-superposition").stats;
        let p = c.p_single();
        let diff_se = ((p[0] + p[1]) / c.trials as f64).sqrt();
        out.push(Check::new(
            "bloch-superposition: P1 = P2 > 0, P∞ = 0",
            c.counts[0] > 0 && c.multiple == 0 && (p[0] - p[1]).abs() <= 5.0 * diff_se,
            format!("P1 {:.4}, P2 {:.4}, multiple {}", p[0], p[1], c.multiple),
        ));
        out
    }

    pub fn report(&self) -> Report {
        let mut r =
            Report::new("two-dim").with_params(vec![("trials", self.trials.into()), ("sigma", self.sigma.into())]);
        let mut t = Table::new(
            "probabilities",
            &[
                "case",
                "noise",
                "s",
                "gamma",
                "p0",
                "p0_stderr",
                "p1",
                "p1_stderr",
                "p2",
                "p2_stderr",
                "p_multiple",
                "p_multiple_stderr",
            ],
        );
        for c in &self.cases {
            let st = &c.stats;
            let p = st.p_single();
            let (p0, pm) = (st.p_none(), st.p_multiple());
            t.push(vec![
                c.label.into(),
                c.kind.name().into(),
                c.s.into(),
                c.gamma.into(),
                p0.into(),
                st.rate_stderr(p0).into(),
                p[0].into(),
                st.rate_stderr(p[0]).into(),
                p[1].into(),
                st.rate_stderr(p[1]).into(),
                pm.into(),
                st.rate_stderr(pm).into(),
            ]);
        }
        r.tables.push(t);
        r.checks = self.checks();
        r
    }
}
