//! Detection statistics and the analytic oracle for Gaussian noise.
//!
//! Monte Carlo estimates count single detections, non-detections and
//! multiple detections. For i.i.d. complex Gaussian noise the same
//! probabilities have a closed form in terms of the Marcum Q-function,
//! which gives an independent check on the simulator.

use serde::Serialize;
use thiserror::Error;

use crate::detection::{measure_observable_slice, measure_slice, DetectionOutcome};
use crate::linalg::{CVec, LinalgError, ObservableSpec};
use crate::noise::{DesignState, NoiseError, NoiseModel, RngStream, NORM_TOL};
use crate::runner::Runner;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("no single detections in {trials} trials; conditional probabilities are undefined")]
    NoDetectionsAtAll { trials: u64 },
    #[error("Q₁ bounds are only asserted for b > a (got a = {a}, b = {b})")]
    DomainTooSmall { a: f64, b: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tallies of a detection experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectionStats {
    /// Single detections per component.
    pub counts: Vec<u64>,
    pub no_detection: u64,
    pub multiple: u64,
    pub trials: u64,
}

impl DetectionStats {
    /// Builds stats from a raw tally laid out as
    /// `[component counts..., no detection, multiple]`.
    pub fn from_tally(tally: &[u64]) -> Self {
        let n = tally.len() - 2;
        let counts = tally[..n].to_vec();
        let no_detection = tally[n];
        let multiple = tally[n + 1];
        let trials = tally.iter().sum();
        Self {
            counts,
            no_detection,
            multiple,
            trials,
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Total single detections.
    pub fn detections(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `P̂_n` for each component.
    pub fn p_single(&self) -> Vec<f64> {
        self.counts.iter().map(|&k| k as f64 / self.trials as f64).collect()
    }

    /// `P̂₀`.
    pub fn p_none(&self) -> f64 {
        self.no_detection as f64 / self.trials as f64
    }

    /// `P̂_∞`.
    pub fn p_multiple(&self) -> f64 {
        self.multiple as f64 / self.trials as f64
    }

    /// Binomial standard error of a rate `p` over all trials.
    pub fn rate_stderr(&self, p: f64) -> f64 {
        binomial_stderr(p, self.trials)
    }

    /// Conditional probabilities `p̂_n = P̂_n / Σ P̂_k`.
    pub fn conditional(&self) -> Result<Vec<f64>, ProbabilityError> {
        let det = self.detections();
        if det == 0 {
            return Err(ProbabilityError::NoDetectionsAtAll { trials: self.trials });
        }
        Ok(self.counts.iter().map(|&k| k as f64 / det as f64).collect())
    }

    /// Binomial standard errors of the conditional probabilities.
    pub fn conditional_stderr(&self) -> Result<Vec<f64>, ProbabilityError> {
        let det = self.detections();
        Ok(self
            .conditional()?
            .into_iter()
            .map(|p| binomial_stderr(p, det))
            .collect())
    }

    /// Eigenvalue-weighted conditional mean `Σ λ_n p̂_n`, with the binomial
    /// standard error of that mean.
    pub fn weighted_mean(&self, values: &[f64]) -> Result<(f64, f64), ProbabilityError> {
        let det = self.detections();
        let p = self.conditional()?;
        let mean: f64 = p.iter().zip(values).map(|(p, v)| p * v).sum();
        let second: f64 = p.iter().zip(values).map(|(p, v)| p * v * v).sum();
        let var = (second - mean * mean).max(0.0);
        Ok((mean, (var / det as f64).sqrt()))
    }
}

pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// `1/√n`, the conventional uncertainty for a mean of ±1 outcomes.
pub fn inverse_sqrt(n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        1.0 / (n as f64).sqrt()
    }
}

pub(crate) fn outcome_slot(outcome: DetectionOutcome, dim: usize) -> usize {
    match outcome {
        DetectionOutcome::Detected { index, .. } => index,
        DetectionOutcome::NoDetection => dim,
        DetectionOutcome::MultipleDetections => dim + 1,
    }
}

/// Monte Carlo estimate in the standard basis, or in the eigenbasis of
/// `basis` when given. Trial `k` uses stream `(seed, k)`.
pub fn estimate_with(
    state: &DesignState,
    model: &NoiseModel,
    gamma: f64,
    basis: Option<&ObservableSpec>,
    trials: u64,
    seed: u64,
    runner: &Runner,
) -> Result<DetectionStats, ProbabilityError> {
    if trials == 0 {
        return Err(ProbabilityError::InvalidInput("trials must be ≥ 1".into()));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(ProbabilityError::InvalidInput(format!(
            "threshold must be non-negative, got {gamma}"
        )));
    }
    let n = state.dim();
    state.check_dim(model.dim())?;
    if let Some(obs) = basis {
        if obs.dim() != n {
            return Err(LinalgError::DimensionMismatch(obs.dim(), n).into());
        }
    }
    let tally = runner.tally(
        trials,
        || vec![0u64; n + 2],
        |k, acc| {
            let mut rng = RngStream::new(seed, k).rng();
            let mut a = [num_complex::Complex64::new(0.0, 0.0); 16];
            let outcome = if n <= 16 {
                state.realize_into(model, &mut rng, &mut a[..n]);
                measure(&a[..n], basis, gamma)
            } else {
                let mut v = vec![num_complex::Complex64::new(0.0, 0.0); n];
                state.realize_into(model, &mut rng, &mut v);
                measure(&v, basis, gamma)
            };
            acc[outcome_slot(outcome, n)] += 1;
        },
    );
    Ok(DetectionStats::from_tally(&tally))
}

#[inline]
fn measure(a: &[num_complex::Complex64], basis: Option<&ObservableSpec>, gamma: f64) -> DetectionOutcome {
    match basis {
        Some(obs) => measure_observable_slice(a, obs, gamma),
        None => measure_slice(a, gamma),
    }
}

/// Standard-basis Monte Carlo estimate on the default worker pool.
pub fn estimate(
    alpha: &CVec,
    s: f64,
    model: &NoiseModel,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> Result<DetectionStats, ProbabilityError> {
    let state = DesignState::new(alpha.clone(), s)?;
    estimate_with(&state, model, gamma, None, trials, seed, &Runner::default())
}

/// Marcum Q-function of order one, `Q₁(a, b) = ∫_b^∞ x e^{-(x²+a²)/2} I₀(ax) dx`.
///
/// Evaluated as the Poisson mixture of Erlang tails,
/// `Q₁(a, b) = Σ_j Pois(j; a²/2) · e^{-b²/2} Σ_{m≤j} (b²/2)^m / m!`,
/// with every term non-negative so there is no cancellation.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    assert!(a >= 0.0 && b >= 0.0, "marcum_q1 requires a, b ≥ 0");
    if b == 0.0 {
        return 1.0;
    }
    let y = 0.5 * b * b;
    if a == 0.0 {
        return (-y).exp();
    }
    let mu = 0.5 * a * a;
    let (ln_mu, ln_y) = (mu.ln(), y.ln());
    let j_max = (mu + 14.0 * mu.sqrt() + 50.0).ceil() as u64;
    let mut tail = 0.0f64;
    let mut q = 0.0f64;
    for j in 0..=j_max {
        let jf = j as f64;
        let ln_fact = libm::lgamma(jf + 1.0);
        tail += (-y + jf * ln_y - ln_fact).exp();
        let weight = (-mu + jf * ln_mu - ln_fact).exp();
        q += weight * tail.min(1.0);
    }
    q.clamp(0.0, 1.0)
}

/// Parameters for the Gaussian-noise oracle. `sigma` is the noise scale of
/// `w = σz` with `E[zz†] = I`, i.e. `E|w_n|² = σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOracleInput {
    alpha: CVec,
    s: f64,
    sigma: f64,
    gamma: f64,
}

impl GaussianOracleInput {
    pub fn new(alpha: CVec, s: f64, sigma: f64, gamma: f64) -> Result<Self, ProbabilityError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ProbabilityError::InvalidInput(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ProbabilityError::InvalidInput(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(NoiseError::InvalidSignal(s).into());
        }
        let norm = alpha.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(NoiseError::UnnormalizedState(norm).into());
        }
        Ok(Self { alpha, s, sigma, gamma })
    }

    pub fn alpha(&self) -> &CVec {
        &self.alpha
    }

    /// Noncentrality of `2|a_i|²/σ²`, which is χ² with two degrees of
    /// freedom in the standard (unit variance per quadrature) sense.
    pub fn noncentrality(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .map(|x| 2.0 * (self.s * x.norm() / self.sigma).powi(2))
            .collect()
    }

    /// Per-component crossing probabilities `Pr[|a_i| > γ] = 1 - F_i(γ)`.
    pub fn crossing_probs(&self) -> Vec<f64> {
        let b = std::f64::consts::SQRT_2 * self.gamma / self.sigma;
        self.noncentrality()
            .into_iter()
            .map(|lambda| marcum_q1(lambda.sqrt(), b))
            .collect()
    }
}

/// Closed-form detection probabilities for i.i.d. Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianDetectionProbs {
    /// `P_n = [1 - F_n] Π_{i≠n} F_i`.
    pub single: Vec<f64>,
    /// `P₀ = Π F_i`.
    pub none: f64,
    /// `P_∞ = 1 - P₀ - Σ P_n`.
    pub multiple: f64,
}

impl GaussianDetectionProbs {
    pub fn conditional(&self) -> Vec<f64> {
        let total: f64 = self.single.iter().sum();
        self.single.iter().map(|p| p / total).collect()
    }
}

pub fn gaussian_detection_probs(inp: &GaussianOracleInput) -> GaussianDetectionProbs {
    let q = inp.crossing_probs();
    let f: Vec<f64> = q.iter().map(|q| 1.0 - q).collect();
    let single: Vec<f64> = (0..q.len())
        .map(|n| {
            q[n] * f
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != n)
                .map(|(_, fi)| fi)
                .product::<f64>()
        })
        .collect();
    let none: f64 = f.iter().product();
    let multiple = (1.0 - none - single.iter().sum::<f64>()).max(0.0);
    GaussianDetectionProbs { single, none, multiple }
}

/// Single-detection probabilities `P_n(α, γ)` for i.i.d. Gaussian noise.
pub fn gaussian_single_detection_probs(inp: &GaussianOracleInput) -> Vec<f64> {
    gaussian_detection_probs(inp).single
}

/// Closed-form lower and upper bounds on `Q₁(a, b)` for large `b`, built
/// from the large-argument form of `I₀`.
pub fn q1_bounds(a: f64, b: f64) -> Result<(f64, f64), ProbabilityError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(ProbabilityError::InvalidInput(format!(
            "q1_bounds requires a > 0, got {a}"
        )));
    }
    if !b.is_finite() || b <= a {
        return Err(ProbabilityError::DomainTooSmall { a, b });
    }
    let d = b - a;
    let erfc = libm::erfc(d / std::f64::consts::SQRT_2);
    let lower = erfc / (4.0 * a).sqrt();
    let upper = (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI * a).sqrt() + (a / 4.0).sqrt() * erfc;
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::noise::NoiseKind;

    /// `e^{-x} I₀(x)` from the power series (small x) or the asymptotic
    /// expansion (large x).
    fn scaled_i0(x: f64) -> f64 {
        if x < 30.0 {
            let (mut term, mut sum, q) = (1.0f64, 1.0f64, x * x / 4.0);
            for k in 1..400 {
                term *= q / (k * k) as f64;
                sum += term;
                if term < sum * 1e-18 {
                    break;
                }
            }
            sum * (-x).exp()
        } else {
            let mut term = 1.0f64;
            let mut sum = 1.0f64;
            for k in 1..12 {
                let m = (2 * k - 1) as f64;
                term *= m * m / (8.0 * x * k as f64);
                sum += term;
            }
            sum / (2.0 * std::f64::consts::PI * x).sqrt()
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }

    /// Direct quadrature of the defining integral.
    fn q1_quadrature(a: f64, b: f64) -> f64 {
        let f = |x: f64| x * (-(x - a) * (x - a) / 2.0).exp() * scaled_i0(a * x);
        let hi = a.max(b) + 15.0;
        let (fa, fm, fb) = (f(b), f(0.5 * (b + hi)), f(hi));
        let whole = (hi - b) / 6.0 * (fa + 4.0 * fm + fb);
        simpson(&f, b, hi, fa, fm, fb, whole, 1e-13, 40)
    }

    #[test]
    fn marcum_matches_quadrature_grid() {
        for i in 0..=16 {
            for j in 0..=16 {
                let (a, b) = (0.5 * i as f64, 0.5 * j as f64);
                let series = marcum_q1(a, b);
                let quad = q1_quadrature(a, b);
                assert!((series - quad).abs() < 1e-9, "a={a} b={b}: {series} vs {quad}");
            }
        }
    }

    #[test]
    fn marcum_reference_values() {
        // noncentral χ² survival function with two degrees of freedom
        let cases = [
            (0.5, 1.0, 0.6427142302725437),
            (1.0, 2.0, 0.26901206003591),
            (2.0, 1.0, 0.9181076963694061),
            (3.0, 3.0, 0.5674797622908612),
            (5.0, 8.0, 0.0017425515909390852),
            (10.0, 7.0, 0.9988918146180641),
            (1.0, 6.0, 7.289385032587628e-07),
            (20.0, 25.0, 3.217572740438976e-07),
        ];
        for (a, b, q) in cases {
            let got = marcum_q1(a, b);
            assert!(((got - q) / q).abs() < 1e-9, "a={a} b={b}: {got} vs {q}");
        }
    }

    proptest::proptest! {
        #[test]
        fn marcum_matches_quadrature(a in 0.0f64..8.0, b in 0.0f64..8.0) {
            let series = marcum_q1(a, b);
            let quad = q1_quadrature(a, b);
            proptest::prop_assert!((series - quad).abs() < 1e-9, "{} vs {}", series, quad);
            proptest::prop_assert!((0.0..=1.0).contains(&series));
        }
    }

    #[test]
    fn marcum_edge_values() {
        for a in [0.0, 0.3, 1.0, 5.0, 20.0] {
            assert_eq!(marcum_q1(a, 0.0), 1.0);
        }
        for b in [0.1, 1.0, 2.5, 7.0] {
            assert!((marcum_q1(0.0, b) - (-b * b / 2.0).exp()).abs() < 1e-15);
            // continuity as a → 0
            assert!((marcum_q1(1e-8, b) - (-b * b / 2.0).exp()).abs() < 1e-12);
        }
        assert!(marcum_q1(3.0, 0.5) < 1.0);
    }

    #[test]
    fn marcum_large_a_approaches_one() {
        assert!((marcum_q1(30.0, 5.0) - 1.0).abs() < 1e-12);
        assert!(marcum_q1(2.0, 40.0) < 1e-250);
    }

    #[test]
    fn marcum_monotone_in_both_arguments() {
        let mut prev = 1.0;
        for k in 1..60 {
            let q = marcum_q1(1.5, k as f64 * 0.1);
            assert!(q <= prev);
            prev = q;
        }
        let mut prev = 0.0;
        for k in 0..60 {
            let q = marcum_q1(k as f64 * 0.1, 2.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn q1_bounds_bracket_large_b() {
        let (lo, hi) = q1_bounds(1.0, 6.0).unwrap();
        let q = marcum_q1(1.0, 6.0);
        assert!(lo <= q && q <= hi, "{lo} {q} {hi}");
    }

    #[test]
    fn q1_bounds_scaling() {
        let (a, b) = (1.0, 10.0);
        let exponent = (b - a) * (b - a) / 2.0;
        let (lo, hi) = q1_bounds(a, b).unwrap();
        for bound in [lo, hi] {
            let ratio = -bound.ln() / exponent;
            assert!((0.5..=2.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn q1_bounds_domain() {
        assert!(matches!(
            q1_bounds(2.0, 1.0),
            Err(ProbabilityError::DomainTooSmall { .. })
        ));
        assert!(q1_bounds(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_signal_closed_form() {
        let (sigma, gamma) = (1.3, 1.7);
        let inp = GaussianOracleInput::new(CVec::from_real(&[0.6, 0.8, 0.0]), 0.0, sigma, gamma).unwrap();
        let probs = gaussian_single_detection_probs(&inp);
        // |w|² is exponential with mean σ² under E[zz†] = I
        let tail = (-gamma * gamma / (sigma * sigma)).exp();
        let expect = tail * (1.0 - tail).powi(2);
        for p in probs {
            assert!((p - expect).abs() < 1e-14, "{p} vs {expect}");
        }
    }

    #[test]
    fn oracle_probabilities_sum_to_one() {
        let inp = GaussianOracleInput::new(CVec::new(vec![c(0.6, 0.0), c(0.0, 0.8)]), 1.5, 1.0, 1.2).unwrap();
        let p = gaussian_detection_probs(&inp);
        let total = p.none + p.multiple + p.single.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
        // independence: P_∞ for two components is Q₁Q₂
        let q = inp.crossing_probs();
        assert!((p.multiple - q[0] * q[1]).abs() < 1e-12);
    }

    #[test]
    fn ratio_decays_with_threshold() {
        let inp = |gamma| GaussianOracleInput::new(CVec::from_real(&[0.6, 0.8]), 2.0, 1.0, gamma).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let gamma = 2.0 + 0.25 * k as f64;
            let p = gaussian_single_detection_probs(&inp(gamma));
            let ratio = p[0] / p[1];
            assert!(ratio < prev, "γ={gamma}: {ratio} ≥ {prev}");
            prev = ratio;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn oracle_rejects_bad_input() {
        let alpha = CVec::from_real(&[1.0, 0.0]);
        assert!(GaussianOracleInput::new(alpha.clone(), 1.0, 0.0, 1.0).is_err());
        assert!(GaussianOracleInput::new(alpha.clone(), 1.0, 1.0, -1.0).is_err());
        assert!(GaussianOracleInput::new(CVec::from_real(&[1.0, 1.0]), 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_noise_estimate_is_deterministic() {
        let model = NoiseModel::gaussian(0.0, 2).unwrap();
        let stats = estimate(&CVec::basis(2, 0), 1.0, &model, 0.5, 1000, 1).unwrap();
        assert_eq!(stats.counts, vec![1000, 0]);
        assert_eq!(stats.conditional().unwrap(), vec![1.0, 0.0]);
        assert_eq!(stats.p_none(), 0.0);
    }

    #[test]
    fn single_phase_example_always_detects_component_one() {
        let model = NoiseModel::new(NoiseKind::SinglePhase, 1.0, 2).unwrap();
        let stats = estimate(&CVec::basis(2, 0), 1.1, &model, 1.0, 10_000, 2).unwrap();
        assert_eq!(stats.counts, vec![10_000, 0]);
        assert_eq!(stats.multiple, 0);
    }

    #[test]
    fn anticorrelated_phase_near_threshold_splits_evenly() {
        let model = NoiseModel::new(NoiseKind::AntiCorrelatedPhase, 1.0, 2).unwrap();
        let alpha = CVec::from_real(&[1.0, 1.0]).normalized();
        let stats = estimate(&alpha, 1.001, &model, 1.0, 200_000, 3).unwrap();
        let p = stats.p_single();
        assert_eq!(stats.no_detection, 0);
        assert!(stats.p_multiple() < 0.002);
        assert!((p[0] - 0.5).abs() < 0.005 && (p[1] - 0.5).abs() < 0.005);
    }

    #[test]
    fn no_detections_is_flagged() {
        let model = NoiseModel::sphere(1.0, 2).unwrap();
        let stats = estimate(&CVec::basis(2, 0), 0.1, &model, 5.0, 100, 1).unwrap();
        assert_eq!(stats.detections(), 0);
        assert!(matches!(
            stats.conditional(),
            Err(ProbabilityError::NoDetectionsAtAll { trials: 100 })
        ));
    }

    #[test]
    fn counting_identity() {
        let model = NoiseModel::gaussian(1.0, 3).unwrap();
        let alpha = CVec::from_real(&[1.0, 1.0, 1.0]).normalized();
        let stats = estimate(&alpha, 1.0, &model, 1.0, 50_000, 8).unwrap();
        assert_eq!(stats.detections() + stats.no_detection + stats.multiple, stats.trials);
        let total = stats.p_none() + stats.p_multiple() + stats.p_single().iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
        let p: f64 = stats.conditional().unwrap().iter().sum();
        assert!((p - 1.0).abs() < 1e-12);
    }
}
