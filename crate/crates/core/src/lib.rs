//! Threshold detection of noisy quantum amplitudes.
//!
//! A design state `α` is scaled by a signal amplitude `s`, perturbed by
//! additive noise and read out by a threshold detector. Repeating this
//! many times reproduces the statistics of quantum measurements.

pub mod cli;
pub mod config;
pub mod detection;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod probability;
pub mod report;
pub mod runner;
pub mod tomography;
