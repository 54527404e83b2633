//! Scripted end-to-end experiments built on the detection model.
//!
//! Each experiment returns a typed result with a `report()` method that
//! renders tables and pass/fail checks for the command-line front end.

pub mod bell;
pub mod born;
pub mod chsh;
pub mod detect;
pub mod magic_square;
pub mod oracle;
pub mod two_dim;

use thiserror::Error;

use crate::detection::PartitionError;
use crate::linalg::{CVec, LinalgError};
use crate::noise::NoiseError;
use crate::probability::ProbabilityError;
use crate::tomography::TomographyError;

/// Signal amplitude `(√2 − 1)σ` at which sphere-normalized noise allows at
/// most one crossing and reproduces the Born rule for equal magnitudes.
pub fn exact_regime_signal(sigma: f64) -> f64 {
    (2f64.sqrt() - 1.0) * sigma
}

/// The Bell state `(|01⟩ + |10⟩)/√2` as `[0, 1, 1, 0]/√2`.
pub fn bell_state() -> CVec {
    CVec::from_real(&[0.0, 1.0, 1.0, 0.0]).normalized()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

pub(crate) fn require_trials(trials: u64) -> Result<(), ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidParameter("trials must be ≥ 1".into()));
    }
    Ok(())
}
