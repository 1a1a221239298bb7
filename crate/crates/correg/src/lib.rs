//! Best linear unbiased estimation when measurement errors are strongly,
//! positively (or negatively) correlated.
//!
//! Ordinary weighted least squares assumes independent errors; once the error
//! correlation matrix approaches unit rank, the familiar intuitions fail in
//! interesting ways: the optimal weights can turn negative, the estimate can
//! fall outside the range of the data (Peelle's pertinent puzzle), and the
//! estimator variance can collapse to zero because near-degenerate error
//! directions carry noise-free information. This crate provides the pieces
//! needed to compute, predict, and validate that behavior:
//!
//! - [`correlation`] — correlation/covariance model construction (AR(1),
//!   exponential-decay, exact unit-rank limits, block composition) with
//!   validation and serialization,
//! - [`estimator`] — generalized least-squares fitting through the covariance
//!   eigenbasis, closed forms for the two-measurement problem, and the
//!   tridiagonal AR(1) precision matrix,
//! - [`subspace`] — spectral analysis of the covariance, the noise-free
//!   subspace that appears in the full-correlation limit, and variance-limit
//!   predictions,
//! - [`sampling`] — exact and asymptotic variance of the mean of equidistant,
//!   exponentially correlated measurements as a function of sample count and
//!   correlation length,
//! - [`monte_carlo`] — deterministic, seed-keyed simulation used to validate
//!   analytic covariances,
//! - [`cli`] — the figure/analysis commands behind the `correg` binary,
//!   including reproducibility manifests.
//!
//! The `examples/` directory is the guided tour; each example is a runnable
//! demonstration of one capability (`cargo run --example two_point_peelle`,
//! `cargo run --example sampling_design`, ...).

pub mod cli;
pub mod correlation;
pub mod error;
pub mod estimator;
pub mod format;
pub mod monte_carlo;
pub mod problem;
pub mod sampling;
pub mod subspace;
pub mod tol;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
