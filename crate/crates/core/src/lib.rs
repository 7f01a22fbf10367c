//! Differentially private measures of statistical heterogeneity.
//!
//! The crate computes dispersion, Cochran's Q and I² over datasets of
//! vectors in `[0, 1]^d`, releases noisy versions of them under the
//! classical and analytic Gaussian mechanisms (in a distributed or a
//! centralized noise setting), and measures how far those releases land
//! from the truth: empirical and closed-form mean squared errors and 95%
//! confidence intervals.
//!
//! Module map:
//!
//! * [`gaussian_mech`]: noise calibration and Gaussian sampling.
//! * [`hetero_measures`]: the noise-free statistics.
//! * [`private_estimators`]: noisy releases of the statistics.
//! * [`error_analysis`]: EMSE / TMSE / CMSE and confidence intervals.
//! * [`data_pipeline`]: IDX and CIFAR loaders, stratified sampling, synthetic data.
//! * [`experiment`]: plans, sweeps, CSV and SVG reports.

pub mod data_pipeline;
pub mod error;
pub mod error_analysis;
pub mod experiment;
pub mod gaussian_mech;
pub mod hetero_measures;
pub mod private_estimators;

pub use error::{Error, Result};
