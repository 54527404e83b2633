//! Hidden-variable noise and the amplitude vector `a = sα + w`.
//!
//! Randomness is counter based: a trial's draws depend only on
//! `(seed, stream_index)`, so results do not depend on how trials are split
//! across workers.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, CVec};

/// Tolerance on `‖α‖ = 1`.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise model {kind} requires dimension {required}, got {dim}")]
    InvalidModel {
        kind: NoiseKind,
        required: usize,
        dim: usize,
    },
    #[error("noise scale must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("design state is not normalized (‖α‖ = {0})")]
    UnnormalizedState(f64),
    #[error("signal amplitude must be finite and non-negative, got {0}")]
    InvalidSignal(f64),
    #[error("noise vector has dimension {got}, state has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown noise kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `w = σz`, with `z` standard complex Gaussian.
    GaussianIid,
    /// `w = σz/‖z‖`.
    SphereNormalized,
    /// `w = σe^{iθ}[0, 1]ᵀ` (two dimensions only).
    SinglePhase,
    /// `w = (σ/√2)e^{iθ}[1, -1]ᵀ` (two dimensions only).
    AntiCorrelatedPhase,
    /// `w = σ[e^{iφ₁}cos θ, e^{iφ₂}sin θ]ᵀ`, θ with density sin 2θ.
    BlochUniform,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::GaussianIid,
        NoiseKind::SphereNormalized,
        NoiseKind::SinglePhase,
        NoiseKind::AntiCorrelatedPhase,
        NoiseKind::BlochUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::GaussianIid => "gaussian",
            NoiseKind::SphereNormalized => "sphere",
            NoiseKind::SinglePhase => "single-phase",
            NoiseKind::AntiCorrelatedPhase => "anti-correlated-phase",
            NoiseKind::BlochUniform => "bloch-uniform",
        }
    }

    fn required_dim(self) -> Option<usize> {
        match self {
            NoiseKind::GaussianIid | NoiseKind::SphereNormalized => None,
            _ => Some(2),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = NoiseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "gaussian" | "gaussian-iid" | "gauss" => NoiseKind::GaussianIid,
            "sphere" | "sphere-normalized" | "normalized" => NoiseKind::SphereNormalized,
            "single-phase" => NoiseKind::SinglePhase,
            "anti-correlated-phase" | "anticorrelated" => NoiseKind::AntiCorrelatedPhase,
            "bloch-uniform" | "bloch" => NoiseKind::BlochUniform,
            _ => return Err(NoiseError::UnknownKind(s.to_string())),
        })
    }
}

/// A validated noise family with scale `sigma` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
    dim: usize,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64, dim: usize) -> Result<Self, NoiseError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(NoiseError::InvalidSigma(sigma));
        }
        if let Some(required) = kind.required_dim() {
            if dim != required {
                return Err(NoiseError::InvalidModel { kind, required, dim });
            }
        }
        Ok(Self { kind, sigma, dim })
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::GaussianIid, sigma, dim)
    }

    pub fn sphere(sigma: f64, dim: usize) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::SphereNormalized, sigma, dim)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draws one noise vector for `stream`.
    pub fn draw(&self, stream: RngStream) -> CVec {
        self.sample(&mut stream.rng())
    }

    /// Draws one noise vector from an arbitrary generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let mut out = CVec::zeros(self.dim);
        self.sample_into(rng, out.as_mut_slice());
        out
    }

    /// Writes one draw into `out` (length must equal `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.dim);
        let sigma = self.sigma;
        match self.kind {
            NoiseKind::GaussianIid => {
                for w in out.iter_mut() {
                    *w = standard_complex_normal(rng) * sigma;
                }
            }
            NoiseKind::SphereNormalized => {
                let mut norm_sqr = 0.0;
                for w in out.iter_mut() {
                    *w = standard_complex_normal(rng);
                    norm_sqr += w.norm_sqr();
                }
                let k = sigma / norm_sqr.sqrt();
                for w in out.iter_mut() {
                    *w *= k;
                }
            }
            NoiseKind::SinglePhase => {
                let theta = rng.random::<f64>() * TAU;
                out[0] = c(0.0, 0.0);
                out[1] = Complex64::from_polar(sigma, theta);
            }
            NoiseKind::AntiCorrelatedPhase => {
                let theta = rng.random::<f64>() * TAU;
                let w = Complex64::from_polar(sigma * FRAC_1_SQRT_2, theta);
                out[0] = w;
                out[1] = -w;
            }
            NoiseKind::BlochUniform => {
                let phi1 = rng.random::<f64>() * TAU;
                let phi2 = rng.random::<f64>() * TAU;
                // CDF of sin 2θ on [0, π/2] is sin²θ
                let theta = rng.random::<f64>().sqrt().asin();
                debug_assert!((0.0..=PI / 2.0).contains(&theta));
                out[0] = Complex64::from_polar(sigma * theta.cos(), phi1);
                out[1] = Complex64::from_polar(sigma * theta.sin(), phi2);
            }
        }
    }
}

/// Complex normal with `E|z|² = 1`: real and imaginary parts each N(0, 1/2).
#[inline]
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `z/‖z‖` for a standard complex Gaussian `z`: a uniformly random pure state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVec {
    CVec::new((0..dim).map(|_| standard_complex_normal(rng)).collect()).normalized()
}

/// Identifies one independent random stream: a seed and a trial counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Generator for this `(seed, stream_index)` pair. The seed keys ChaCha8
    /// and the index selects the ChaCha stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Derives an independent seed for a labelled sub-experiment.
pub fn derive_seed(seed: u64, lane: u64) -> u64 {
    splitmix64(seed ^ splitmix64(lane.wrapping_add(0x6A09_E667_F3BC_C909)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A normalized design state `α` together with its signal amplitude `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    alpha: CVec,
    s: f64,
}

impl DesignState {
    pub fn new(alpha: CVec, s: f64) -> Result<Self, NoiseError> {
        let norm = alpha.norm();
        if !alpha.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(NoiseError::UnnormalizedState(norm));
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(NoiseError::InvalidSignal(s));
        }
        Ok(Self { alpha, s })
    }

    pub fn alpha(&self) -> &CVec {
        &self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// `sα + w` for a fresh draw from `model` on `stream`.
    pub fn realize(&self, model: &NoiseModel, stream: RngStream) -> Result<CVec, NoiseError> {
        self.check_dim(model.dim())?;
        let mut a = CVec::zeros(self.dim());
        self.realize_into(model, &mut stream.rng(), a.as_mut_slice());
        Ok(a)
    }

    /// Hot-loop variant: writes `sα + w` into `out`. Dimensions are assumed
    /// to have been checked by the caller.
    #[inline]
    pub fn realize_into<R: Rng + ?Sized>(&self, model: &NoiseModel, rng: &mut R, out: &mut [Complex64]) {
        model.sample_into(rng, out);
        for (o, a) in out.iter_mut().zip(self.alpha.iter()) {
            *o += a * self.s;
        }
    }

    /// `sα + w` for an injected noise vector.
    pub fn realize_with_noise(&self, w: &CVec) -> Result<CVec, NoiseError> {
        self.check_dim(w.dim())?;
        Ok(self.alpha.axpy(self.s, w).expect("dimensions checked above"))
    }

    pub fn check_dim(&self, dim: usize) -> Result<(), NoiseError> {
        if dim != self.dim() {
            return Err(NoiseError::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }
}

/// `sα + w` for one fresh noise draw.
pub fn realize(alpha: &CVec, s: f64, model: &NoiseModel, stream: RngStream) -> Result<CVec, NoiseError> {
    DesignState::new(alpha.clone(), s)?.realize(model, stream)
}

/// Draws one noise vector; the model was validated on construction.
pub fn draw_noise(model: &NoiseModel, stream: RngStream) -> CVec {
    model.draw(stream)
}
