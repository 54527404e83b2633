//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when
//! `--check` is given and a check fails.

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{load_vectors, parse_state, ConfigError, ConfigFile};
use crate::detection::{measure_observable, measure_projective, SubspacePartition};
use crate::experiments::bell::run_bell_state_checks;
use crate::experiments::born::{has_equal_magnitudes, run_born, BornParams};
use crate::experiments::chsh::{local_observables, run_chsh_joint, run_chsh_local, ChshParams};
use crate::experiments::detect::{detect_report, run_detect_probs};
use crate::experiments::magic_square::{
    replay_report, run_magic_square, MagicParams, DEFAULT_STATES, DEFAULT_TRIALS, FULL_SCALE_STATES, FULL_SCALE_TRIALS,
};
use crate::experiments::oracle::{compare_oracle, oracle_report};
use crate::experiments::two_dim::run_two_dim_examples;
use crate::experiments::{bell_state, exact_regime_signal, ExperimentError};
use crate::linalg::{standard_unitaries, verify_diagonalization, CVec, ObservableSpec};
use crate::noise::{DesignState, NoiseKind, NoiseModel};
use crate::report::{Format, Report, Table};
use crate::runner::Runner;
use crate::tomography::{bloch_vector, bplus_counterexample, infer_state, tomography_report};

/// Default number of realizations per ensemble.
pub const DEFAULT_TRIALS_PER_RUN: u64 = 1 << 20;
/// Seed used when neither a flag, a config file nor `SEED` provides one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "qthresh",
    version,
    about = "Threshold-detection model of quantum measurement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Detection probabilities P0, Pn, P∞ and conditional pn for one state
    DetectProbs,
    /// Conditional detections against the Born rule
    Born,
    /// Single-qubit state inference and the B+ comparison
    Tomography,
    /// Mermin–Peres magic square over random states
    MagicSquare,
    /// CHSH with joint measurements on independent ensembles
    ChshJoint,
    /// CHSH with separated Alice/Bob measurements and coincidences
    ChshLocal,
    /// Bell-state detection statistics in two bases
    BellState,
    /// The four two-dimensional noise examples
    TwoDim,
    /// Gaussian closed-form probabilities against Monte Carlo
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DetectProbs => "detect-probs",
            Command::Born => "born",
            Command::Tomography => "tomography",
            Command::MagicSquare => "magic-square",
            Command::ChshJoint => "chsh-joint",
            Command::ChshLocal => "chsh-local",
            Command::BellState => "bell-state",
            Command::TwoDim => "two-dim",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Opts {
    /// Realizations per ensemble (per state for magic-square)
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Base seed; falls back to the SEED environment variable
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Also write the report to this file
    #[arg(long, global = true)]
    pub output: Option<String>,
    /// Output format: csv or json
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Flat `key = value` config file; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Exit with status 2 if any check fails
    #[arg(long, global = true)]
    pub check: bool,
    /// Noise family: gaussian, sphere, single-phase, anti-correlated-phase, bloch-uniform
    #[arg(long, global = true)]
    pub noise: Option<String>,
    /// Noise scale σ
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Signal amplitude s
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Detection threshold γ
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Design state, comma-separated complex components (normalized automatically)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Number of random states for magic-square
    #[arg(long, global = true)]
    pub states: Option<u64>,
    /// Replay amplitude vectors `sα + w` from a file (`re,im` per line, blank line between vectors)
    #[arg(long, global = true)]
    pub inject: Option<String>,
    /// Replay noise vectors `w` from a file, added to `sα`
    #[arg(long, global = true)]
    pub inject_noise: Option<String>,
    /// Full-scale magic-square run (2^16 states × 2^20 trials)
    #[arg(long, global = true)]
    pub full_scale: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub trials: Option<u64>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub output: Option<String>,
    pub format: Format,
    pub check: bool,
    pub noise: Option<NoiseKind>,
    pub sigma: Option<f64>,
    pub s: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<CVec>,
    pub states: Option<u64>,
    pub inject: Option<String>,
    pub inject_noise: Option<String>,
    pub full_scale: bool,
}

impl RunConfig {
    /// Merges flags over the config file over the environment.
    pub fn resolve(command: Command, opts: &Opts, env_seed: Option<String>) -> Result<Self, CliError> {
        let file = match &opts.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| invalid(format!("SEED must be an unsigned integer, got `{s}`")))
            })
            .transpose()?;
        let seed = match (opts.seed, file.get::<u64>("seed")?) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => env_seed.unwrap_or(DEFAULT_SEED),
        };
        let pick_f64 =
            |flag: Option<f64>, key: &str| -> Result<Option<f64>, CliError> { Ok(flag.or(file.get::<f64>(key)?)) };
        let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.raw(key).map(str::to_string));

        let trials = opts.trials.or(file.get::<u64>("trials")?);
        if trials == Some(0) {
            return Err(invalid("--trials must be at least 1"));
        }
        let workers = opts.workers.or(file.get::<usize>("workers")?);
        if workers == Some(0) {
            return Err(invalid("--workers must be at least 1"));
        }
        let states = opts.states.or(file.get::<u64>("states")?);
        if states == Some(0) {
            return Err(invalid("--states must be at least 1"));
        }
        let format = match text(&opts.format, "format") {
            Some(f) => f.parse::<Format>().map_err(invalid)?,
            None => Format::Csv,
        };
        let noise = text(&opts.noise, "noise")
            .map(|n| n.parse::<NoiseKind>().map_err(|e| invalid(e.to_string())))
            .transpose()?;
        let alpha = text(&opts.alpha, "alpha")
            .map(|a| parse_state(&a).map_err(|e| invalid(format!("--alpha: {e}"))))
            .transpose()?;
        let sigma = pick_f64(opts.sigma, "sigma")?;
        let s = pick_f64(opts.s, "s")?;
        let gamma = pick_f64(opts.gamma, "gamma")?;
        for (name, v) in [("sigma", sigma), ("s", s), ("gamma", gamma)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("--{name} must be finite and non-negative, got {v}")));
                }
            }
        }
        Ok(Self {
            command,
            trials,
            seed,
            workers,
            output: text(&opts.output, "output"),
            format,
            check: opts.check || file.flag("check")?,
            noise,
            sigma,
            s,
            gamma,
            alpha,
            states,
            inject: opts.inject.clone(),
            inject_noise: opts.inject_noise.clone(),
            full_scale: opts.full_scale || file.flag("full-scale")?,
        })
    }

    fn trials_or(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }

    fn runner(&self) -> Result<Runner, CliError> {
        match self.workers {
            Some(w) => Runner::new(w).map_err(|e| invalid(format!("cannot start {w} workers: {e}"))),
            None => Ok(Runner::default()),
        }
    }

    /// Injected realizations, either given directly or as noise added to `sα`.
    fn injected(&self, default_alpha: &CVec, default_s: f64) -> Result<Option<Vec<CVec>>, CliError> {
        match (&self.inject, &self.inject_noise) {
            (Some(_), Some(_)) => Err(invalid("use either --inject or --inject-noise, not both")),
            (Some(path), None) => Ok(Some(load_vectors(path)?)),
            (None, Some(path)) => {
                let alpha = self.alpha.clone().unwrap_or_else(|| default_alpha.clone());
                let state = DesignState::new(alpha, self.s.unwrap_or(default_s)).map_err(ExperimentError::from)?;
                load_vectors(path)?
                    .iter()
                    .map(|w| state.realize_with_noise(w).map_err(|e| CliError::Experiment(e.into())))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some)
            }
            (None, None) => Ok(None),
        }
    }
}

fn require_dim(vectors: &[CVec], dim: usize) -> Result<(), CliError> {
    match vectors.iter().find(|v| v.dim() != dim) {
        Some(v) => Err(invalid(format!(
            "injected vector has dimension {}, expected {dim}",
            v.dim()
        ))),
        None => Ok(()),
    }
}

/// Runs the selected experiment and returns its report.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let runner = cfg.runner()?;
    let seed = cfg.seed;
    let sphere_s = exact_regime_signal(cfg.sigma.unwrap_or(1.0));
    match cfg.command {
        Command::DetectProbs => {
            let alpha = cfg.alpha.clone().unwrap_or_else(|| CVec::basis(2, 0));
            let kind = cfg.noise.unwrap_or(NoiseKind::SphereNormalized);
            let sigma = cfg.sigma.unwrap_or(1.0);
            let s = cfg.s.unwrap_or(sphere_s);
            let gamma = cfg.gamma.unwrap_or(sigma);
            let model = NoiseModel::new(kind, sigma, alpha.dim()).map_err(ExperimentError::from)?;
            let stats = run_detect_probs(
                &alpha,
                s,
                &model,
                gamma,
                cfg.trials_or(DEFAULT_TRIALS_PER_RUN),
                seed,
                &runner,
            )?;
            Ok(detect_report(&stats, s, &model, gamma))
        }
        Command::Born => {
            let alpha = cfg.alpha.clone().unwrap_or_else(bell_state);
            let mut params = BornParams::for_kind(alpha, cfg.noise.unwrap_or(NoiseKind::SphereNormalized));
            if let Some(sigma) = cfg.sigma {
                params.sigma = sigma;
            }
            if let Some(s) = cfg.s {
                params.s = s;
            }
            if let Some(g) = cfg.gamma {
                params.gammas = vec![g];
            }
            Ok(run_born(params, cfg.trials_or(DEFAULT_TRIALS_PER_RUN), seed, &runner)?.report())
        }
        Command::Tomography => tomography(cfg, &runner),
        Command::MagicSquare => {
            if let Some(vectors) = cfg.injected(&bell_state(), sphere_s)? {
                require_dim(&vectors, 4)?;
                return Ok(replay_report(&vectors, cfg.gamma.unwrap_or(1.0))?);
            }
            let defaults = MagicParams::default();
            let params = MagicParams {
                kind: cfg.noise.unwrap_or(defaults.kind),
                sigma: cfg.sigma.unwrap_or(defaults.sigma),
                s: cfg.s.unwrap_or(sphere_s),
                gamma: cfg.gamma.unwrap_or(cfg.sigma.unwrap_or(defaults.gamma)),
            };
            let (states, trials) = if cfg.full_scale {
                (FULL_SCALE_STATES, FULL_SCALE_TRIALS)
            } else {
                (DEFAULT_STATES, DEFAULT_TRIALS)
            };
            let states = cfg.states.unwrap_or(states);
            Ok(run_magic_square(params, states, cfg.trials_or(trials), seed, &runner)?.report())
        }
        Command::ChshJoint => {
            let params = chsh_params(
                cfg,
                ChshParams::for_kind(cfg.noise.unwrap_or(NoiseKind::SphereNormalized)),
            );
            Ok(run_chsh_joint(params, cfg.trials_or(DEFAULT_TRIALS_PER_RUN), seed, &runner)?.report())
        }
        Command::ChshLocal => {
            if let Some(vectors) = cfg.injected(&bell_state(), sphere_s)? {
                require_dim(&vectors, 4)?;
                return local_replay(&vectors, cfg.gamma.unwrap_or(1.0));
            }
            let params = chsh_params(
                cfg,
                ChshParams::local_for_kind(cfg.noise.unwrap_or(NoiseKind::SphereNormalized)),
            );
            Ok(run_chsh_local(params, cfg.trials_or(DEFAULT_TRIALS_PER_RUN), seed, &runner)?.report())
        }
        Command::BellState => Ok(run_bell_state_checks(cfg.trials_or(DEFAULT_TRIALS_PER_RUN), seed, &runner)?.report()),
        Command::TwoDim => Ok(run_two_dim_examples(cfg.trials_or(DEFAULT_TRIALS_PER_RUN), seed, &runner)?.report()),
        Command::Oracle => {
            if cfg.noise.is_some_and(|k| k != NoiseKind::GaussianIid) {
                return Err(invalid("the oracle applies to gaussian noise only"));
            }
            let alpha = cfg.alpha.clone().unwrap_or_else(|| CVec::basis(2, 0));
            let cmp = compare_oracle(
                &alpha,
                cfg.s.unwrap_or(1.0),
                cfg.sigma.unwrap_or(1.0),
                cfg.gamma.unwrap_or(3.0),
                cfg.trials_or(DEFAULT_TRIALS_PER_RUN),
                seed,
                &runner,
            )?;
            Ok(oracle_report(&cmp))
        }
    }
}

fn chsh_params(cfg: &RunConfig, base: ChshParams) -> ChshParams {
    ChshParams {
        kind: base.kind,
        sigma: cfg.sigma.unwrap_or(base.sigma),
        s: cfg.s.unwrap_or(base.s),
        gamma: cfg.gamma.unwrap_or(base.gamma),
    }
}

fn tomography(cfg: &RunConfig, runner: &Runner) -> Result<Report, CliError> {
    let su = standard_unitaries();
    let sigma = cfg.sigma.unwrap_or(1.0);
    let s = cfg.s.unwrap_or(exact_regime_signal(sigma));
    let gamma = cfg.gamma.unwrap_or(sigma);
    let alpha = cfg.alpha.clone().unwrap_or_else(|| CVec::basis(2, 0));
    if alpha.dim() != 2 {
        return Err(invalid("tomography needs a two-component --alpha"));
    }
    let bases = [("Z", &su.i, &su.z), ("X", &su.h, &su.x), ("Y", &su.v, &su.y)];

    if let Some(vectors) = cfg.injected(&alpha, s)? {
        require_dim(&vectors, 2)?;
        let mut r = Report::new("tomography").with_params(vec![
            ("replayed_vectors", vectors.len().into()),
            ("gamma", gamma.into()),
        ]);
        let mut t = Table::new("replay", &["vector", "observable", "outcome", "value"]);
        for (k, a) in vectors.iter().enumerate() {
            for (name, u, op) in bases {
                let obs = ObservableSpec::from_operator(u.clone(), op).map_err(ExperimentError::from)?;
                let o = measure_observable(a, &obs, gamma).map_err(ExperimentError::from)?;
                t.push(vec![
                    (k + 1).into(),
                    name.into(),
                    o.label().into(),
                    o.value().unwrap_or(f64::NAN).into(),
                ]);
            }
        }
        r.tables.push(t);
        return Ok(r);
    }

    let kind = cfg.noise.unwrap_or(NoiseKind::SphereNormalized);
    let model = NoiseModel::new(kind, sigma, 2).map_err(ExperimentError::from)?;
    let trials = cfg.trials_or(DEFAULT_TRIALS_PER_RUN);
    let state = infer_state(&alpha, s, &model, gamma, trials, cfg.seed, runner).map_err(ExperimentError::from)?;
    // the exact regime covers states mapped to equal magnitudes by every basis change
    let in_regime = kind == NoiseKind::SphereNormalized
        && sigma <= gamma
        && gamma * gamma < s * s / 2.0 + sigma * sigma
        && bases
            .iter()
            .all(|(_, u, _)| has_equal_magnitudes(&u.adjoint_mul_vec(&alpha).expect("qubit")));
    let expected = in_regime.then(|| bloch_vector(&alpha));
    let bplus =
        bplus_counterexample(trials, crate::noise::derive_seed(cfg.seed, 99), runner).map_err(ExperimentError::from)?;
    Ok(tomography_report(trials, &state, expected, &bplus))
}

fn local_replay(vectors: &[CVec], gamma: f64) -> Result<Report, CliError> {
    let (alice, bob) = local_observables();
    let parties = ["A", "A'", "B", "B'"].into_iter().zip(alice.into_iter().chain(bob));
    let mut r = Report::new("chsh-local").with_params(vec![
        ("replayed_vectors", vectors.len().into()),
        ("gamma", gamma.into()),
    ]);
    let mut t = Table::new(
        "replay",
        &["vector", "observable", "outcome", "norm_sqr_plus", "norm_sqr_minus"],
    );
    for (k, a) in vectors.iter().enumerate() {
        for (name, (u, op)) in parties.clone() {
            let eig = verify_diagonalization(&u, &op).map_err(ExperimentError::from)?;
            let part = SubspacePartition::from_eigenvalues(&eig);
            let b = u.adjoint_mul_vec(a).map_err(ExperimentError::from)?;
            // report the +1 subspace first
            let norms = part.group_norms_sqr(b.as_slice());
            let plus = part.values().iter().position(|&v| v > 0.0).unwrap_or(0);
            let o = measure_projective(a, &u, &part, gamma).map_err(ExperimentError::from)?;
            t.push(vec![
                (k + 1).into(),
                name.into(),
                o.label().into(),
                norms[plus].into(),
                norms[1 - plus].into(),
            ]);
        }
    }
    r.tables.push(t);
    Ok(r)
}

/// Parses arguments, runs, writes output. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let cfg = match RunConfig::resolve(cli.command, &cli.opts, std::env::var("SEED").ok()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let report = match execute(&cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let text = report.render(cfg.format);
    if let Some(path) = &cfg.output {
        if let Err(e) = std::fs::write(path, &text) {
            let err = CliError::Output {
                path: path.clone(),
                message: e.to_string(),
            };
            let _ = writeln!(stderr, "error: {err}");
            return 1;
        }
    }
    let _ = stdout.write_all(text.as_bytes());
    if cfg.check {
        for c in &report.checks {
            let _ = writeln!(stderr, "{c}");
        }
        if !report.passed() {
            return 2;
        }
    }
    0
}
