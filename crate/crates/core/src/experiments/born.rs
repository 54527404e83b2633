//! Conditional detection probabilities against the Born rule.

use crate::linalg::CVec;
use crate::noise::{derive_seed, DesignState, NoiseKind, NoiseModel};
use crate::probability::{estimate_with, gaussian_detection_probs, DetectionStats, GaussianOracleInput};
use crate::report::{Check, Report, Table, Value};
use crate::runner::Runner;

use super::{require_trials, ExperimentError};

#[derive(Debug, Clone, PartialEq)]
pub struct BornParams {
    pub alpha: CVec,
    pub kind: NoiseKind,
    pub sigma: f64,
    pub s: f64,
    pub gammas: Vec<f64>,
}

impl BornParams {
    /// Sphere-normalized noise at `s = (√2 − 1)σ`, `γ = σ`, where the Born
    /// rule holds exactly for equal-magnitude states.
    pub fn exact(alpha: CVec) -> Self {
        Self {
            alpha,
            kind: NoiseKind::SphereNormalized,
            sigma: 1.0,
            s: super::exact_regime_signal(1.0),
            gammas: vec![1.0],
        }
    }

    /// Gaussian noise with the threshold swept upward, where the Born rule
    /// is approached asymptotically.
    pub fn asymptotic(alpha: CVec) -> Self {
        Self {
            alpha,
            kind: NoiseKind::GaussianIid,
            sigma: 1.0,
            s: 3.0,
            gammas: vec![2.0, 3.0, 4.0],
        }
    }

    pub fn for_kind(alpha: CVec, kind: NoiseKind) -> Self {
        match kind {
            NoiseKind::GaussianIid => Self::asymptotic(alpha),
            other => Self {
                kind: other,
                ..Self::exact(alpha)
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornRun {
    pub params: BornParams,
    pub trials: u64,
    /// One set of statistics per threshold.
    pub stats: Vec<DetectionStats>,
}

pub fn run_born(params: BornParams, trials: u64, seed: u64, runner: &Runner) -> Result<BornRun, ExperimentError> {
    require_trials(trials)?;
    if params.gammas.is_empty() {
        return Err(ExperimentError::InvalidParameter(
            "at least one threshold is required".into(),
        ));
    }
    let model = NoiseModel::new(params.kind, params.sigma, params.alpha.dim())?;
    let state = DesignState::new(params.alpha.clone(), params.s)?;
    let mut stats = Vec::new();
    for (lane, &gamma) in params.gammas.iter().enumerate() {
        stats.push(estimate_with(
            &state,
            &model,
            gamma,
            None,
            trials,
            derive_seed(seed, lane as u64),
            runner,
        )?);
    }
    Ok(BornRun { params, trials, stats })
}

/// Whether the nonzero components of `alpha` all share one magnitude.
pub fn has_equal_magnitudes(alpha: &CVec) -> bool {
    let mags: Vec<f64> = alpha.magnitudes().into_iter().filter(|&m| m > 1e-12).collect();
    mags.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9)
}

impl BornRun {
    fn born(&self) -> Vec<f64> {
        self.params.alpha.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Half the L1 distance between the conditional and Born distributions.
    pub fn distance(&self, k: usize) -> Option<f64> {
        let p = self.stats[k].conditional().ok()?;
        Some(0.5 * p.iter().zip(self.born()).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Conditional probability mass on components with `α_n = 0`, the part
    /// of the distribution that has to vanish for the Born rule to hold.
    pub fn zero_mass(&self, k: usize) -> Option<f64> {
        let p = self.stats[k].conditional().ok()?;
        Some(
            p.iter()
                .zip(self.born())
                .filter(|(_, b)| *b < 1e-12)
                .map(|(p, _)| p)
                .sum(),
        )
    }

    /// Zero-component mass when there are zero components, else the
    /// distance to the Born distribution.
    fn deviation(&self, k: usize) -> Option<f64> {
        if self.born().iter().any(|&b| b < 1e-12) {
            self.zero_mass(k)
        } else {
            self.distance(k)
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        let born = self.born();
        let mut out = Vec::new();
        if !has_equal_magnitudes(&self.params.alpha) {
            return out;
        }
        match self.params.kind {
            NoiseKind::GaussianIid => {
                let mut ok = true;
                let mut detail = Vec::new();
                for k in 0..self.stats.len() {
                    let d = self.deviation(k);
                    detail.push(format!(
                        "γ={}: {}",
                        self.params.gammas[k],
                        d.map_or("n/a".into(), |d| format!("{d:.4}"))
                    ));
                    if k > 0 {
                        match (self.deviation(k - 1), d) {
                            (Some(prev), Some(cur)) => {
                                let n = self.stats[k].detections().max(1) as f64;
                                let se = (cur * (1.0 - cur) / n).sqrt().max(1.0 / n);
                                ok &= cur <= prev + 3.0 * se;
                            }
                            _ => ok = false,
                        }
                    }
                }
                out.push(Check::new(
                    "deviation from the Born rule shrinks as the threshold rises",
                    ok,
                    detail.join(", "),
                ));
            }
            _ => {
                for (k, st) in self.stats.iter().enumerate() {
                    let gamma = self.params.gammas[k];
                    let det = st.detections();
                    let tol = 4.0 / (det.max(1) as f64).sqrt();
                    let (ok, detail) = match st.conditional() {
                        Ok(p) => {
                            let ok = p.iter().zip(&born).zip(&st.counts).all(|((p, b), &c)| {
                                if *b < 1e-12 {
                                    c == 0
                                } else {
                                    (p - b).abs() <= tol
                                }
                            });
                            (
                                ok,
                                format!(
                                    "p̂ = {:?}, tolerance {tol:.4}",
                                    p.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
                                ),
                            )
                        }
                        Err(e) => (false, e.to_string()),
                    };
                    out.push(Check::new(&format!("Born rule at γ={gamma}"), ok, detail));
                }
            }
        }
        out
    }

    pub fn report(&self) -> Report {
        let p = &self.params;
        let mut r = Report::new("born").with_params(vec![
            ("trials", self.trials.into()),
            ("noise", p.kind.name().into()),
            ("sigma", p.sigma.into()),
            ("s", p.s.into()),
        ]);
        let gaussian = p.kind == NoiseKind::GaussianIid;
        let mut cols = vec!["gamma", "component", "born", "count", "p_hat", "p_hat_stderr"];
        if gaussian {
            cols.push("oracle");
        }
        let mut t = Table::new("conditional", &cols);
        let born = self.born();
        for (k, st) in self.stats.iter().enumerate() {
            let gamma = p.gammas[k];
            let cond = st.conditional().ok();
            let se = st.conditional_stderr().ok();
            let oracle = if gaussian {
                GaussianOracleInput::new(p.alpha.clone(), p.s, p.sigma, gamma)
                    .ok()
                    .map(|inp| gaussian_detection_probs(&inp).conditional())
            } else {
                None
            };
            for n in 0..st.dim() {
                let mut row: Vec<Value> = vec![
                    gamma.into(),
                    (n + 1).into(),
                    born[n].into(),
                    st.counts[n].into(),
                    cond.as_ref().map_or(f64::NAN, |c| c[n]).into(),
                    se.as_ref().map_or(f64::NAN, |c| c[n]).into(),
                ];
                if gaussian {
                    row.push(oracle.as_ref().map_or(f64::NAN, |o| o[n]).into());
                }
                t.push(row);
            }
        }
        r.tables.push(t);
        let mut t = Table::new("totals", &["gamma", "trials", "detections", "no_detection", "multiple"]);
        for (k, st) in self.stats.iter().enumerate() {
            t.push(vec![
                p.gammas[k].into(),
                st.trials.into(),
                st.detections().into(),
                st.no_detection.into(),
                st.multiple.into(),
            ]);
        }
        r.tables.push(t);
        r.checks = self.checks();
        r
    }
}
