//! Raw detection probabilities for an arbitrary state and noise model.

use crate::linalg::CVec;
use crate::noise::{DesignState, NoiseModel};
use crate::probability::{estimate_with, DetectionStats};
use crate::report::{Check, Report, Table};
use crate::runner::Runner;

use super::{require_trials, ExperimentError};

pub fn run_detect_probs(
    alpha: &CVec,
    s: f64,
    model: &NoiseModel,
    gamma: f64,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<DetectionStats, ExperimentError> {
    require_trials(trials)?;
    let state = DesignState::new(alpha.clone(), s)?;
    Ok(estimate_with(&state, model, gamma, None, trials, seed, runner)?)
}

pub fn detect_report(stats: &DetectionStats, s: f64, model: &NoiseModel, gamma: f64) -> Report {
    let mut r = Report::new("detect-probs").with_params(vec![
        ("trials", stats.trials.into()),
        ("noise", model.kind().name().into()),
        ("sigma", model.sigma().into()),
        ("s", s.into()),
        ("gamma", gamma.into()),
    ]);
    let mut t = Table::new(
        "outcomes",
        &[
            "outcome",
            "count",
            "probability",
            "probability_stderr",
            "conditional",
            "conditional_stderr",
        ],
    );
    let cond = stats.conditional().ok();
    let cond_se = stats.conditional_stderr().ok();
    for (n, &count) in stats.counts.iter().enumerate() {
        let p = count as f64 / stats.trials as f64;
        t.push(vec![
            format!("{}", n + 1).into(),
            count.into(),
            p.into(),
            stats.rate_stderr(p).into(),
            cond.as_ref().map_or(f64::NAN, |c| c[n]).into(),
            cond_se.as_ref().map_or(f64::NAN, |c| c[n]).into(),
        ]);
    }
    for (label, count) in [("none", stats.no_detection), ("multiple", stats.multiple)] {
        let p = count as f64 / stats.trials as f64;
        t.push(vec![
            label.into(),
            count.into(),
            p.into(),
            stats.rate_stderr(p).into(),
            f64::NAN.into(),
            f64::NAN.into(),
        ]);
    }
    r.tables.push(t);
    let total = stats.detections() + stats.no_detection + stats.multiple;
    r.checks.push(Check::new(
        "outcome counts sum to the number of trials",
        total == stats.trials,
        format!("{total} of {}", stats.trials),
    ));
    if let Err(e) = stats.conditional() {
        r.checks
            .push(Check::new("at least one single detection", false, e.to_string()));
    }
    r
}
