//! Closed-form Gaussian detection probabilities against Monte Carlo.

use crate::linalg::CVec;
use crate::noise::{DesignState, NoiseModel};
use crate::probability::{
    binomial_stderr, estimate_with, gaussian_detection_probs, DetectionStats, GaussianDetectionProbs,
    GaussianOracleInput,
};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

use super::{require_trials, ExperimentError};

/// Agreement threshold in binomial standard errors.
pub const Z_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub alpha: CVec,
    pub s: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub oracle: GaussianDetectionProbs,
    pub stats: DetectionStats,
}

impl OracleComparison {
    /// `(oracle, estimate, stderr, z)` for each single-detection outcome,
    /// followed by no detection and multiple detections.
    pub fn rows(&self) -> Vec<(String, f64, f64, f64, f64)> {
        let st = &self.stats;
        let mut out = Vec::new();
        let mut push = |label: String, p: f64, hat: f64| {
            // the standard error is taken at the predicted probability so a
            // zero count against a tiny prediction is not infinitely significant
            let se = binomial_stderr(p, st.trials);
            let z = if se > 0.0 {
                (hat - p) / se
            } else if hat == p {
                0.0
            } else {
                f64::INFINITY
            };
            out.push((label, p, hat, se, z));
        };
        for (n, (&p, hat)) in self.oracle.single.iter().zip(st.p_single()).enumerate() {
            push(format!("P{}", n + 1), p, hat);
        }
        push("P0".into(), self.oracle.none, st.p_none());
        push("P_multiple".into(), self.oracle.multiple, st.p_multiple());
        out
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rows().iter().map(|r| r.4.abs()).fold(0.0, f64::max)
    }

    pub fn agrees(&self) -> bool {
        self.max_abs_z() <= Z_LIMIT
    }
}

pub fn compare_oracle(
    alpha: &CVec,
    s: f64,
    sigma: f64,
    gamma: f64,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<OracleComparison, ExperimentError> {
    require_trials(trials)?;
    let inp = GaussianOracleInput::new(alpha.clone(), s, sigma, gamma)?;
    let oracle = gaussian_detection_probs(&inp);
    let model = NoiseModel::gaussian(sigma, alpha.dim())?;
    let state = DesignState::new(alpha.clone(), s)?;
    let stats = estimate_with(&state, &model, gamma, None, trials, seed, runner)?;
    Ok(OracleComparison {
        alpha: alpha.clone(),
        s,
        sigma,
        gamma,
        oracle,
        stats,
    })
}

pub fn oracle_report(cmp: &OracleComparison) -> Report {
    let mut r = Report::new("oracle").with_params(vec![
        ("trials", cmp.stats.trials.into()),
        ("s", cmp.s.into()),
        ("sigma", cmp.sigma.into()),
        ("gamma", cmp.gamma.into()),
    ]);
    let mut t = Table::new("probabilities", &["outcome", "oracle", "monte_carlo", "stderr", "z"]);
    for (label, p, hat, se, z) in cmp.rows() {
        t.push(vec![label.into(), p.into(), hat.into(), se.into(), z.into()]);
    }
    r.tables.push(t);
    r.checks.push(Check::new(
        "oracle agrees with Monte Carlo within 5 standard errors",
        cmp.agrees(),
        format!("max |z| = {:.2}", cmp.max_abs_z()),
    ));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn oracle_matches_monte_carlo_for_complex_state() {
        let alpha = CVec::new(vec![c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)]);
        let alpha = alpha.normalized();
        let cmp = compare_oracle(&alpha, 2.0, 1.0, 2.0, 400_000, 12, &Runner::default()).unwrap();
        assert!(cmp.agrees(), "{:?}", cmp.rows());
    }

    #[test]
    fn oracle_matches_monte_carlo_with_scaled_noise() {
        let alpha = CVec::from_real(&[1.0, 0.0]);
        let cmp = compare_oracle(&alpha, 1.5, 0.7, 1.2, 400_000, 13, &Runner::default()).unwrap();
        assert!(cmp.agrees(), "{:?}", cmp.rows());
    }

    #[test]
    fn unit_quadrature_variance_convention_disagrees() {
        // with variance one per quadrature the zero-signal non-crossing
        // probability would be 1 - e^{-γ²/2}; the sampler has E|w|² = σ²
        let alpha = CVec::from_real(&[1.0, 0.0]);
        let gamma = 1.5;
        let cmp = compare_oracle(&alpha, 0.0, 1.0, gamma, 200_000, 14, &Runner::default()).unwrap();
        assert!(cmp.agrees(), "{:?}", cmp.rows());
        let naive = (1.0 - (-gamma * gamma / 2.0f64).exp()).powi(2);
        let se = binomial_stderr(naive, cmp.stats.trials);
        assert!((cmp.stats.p_none() - naive).abs() > 20.0 * se);
    }
}
