//! Crate error type.
//!
//! Variants are deliberately specific: the interesting failure modes here are
//! numerical (indefinite matrices, saturated correlations, degenerate limits),
//! and a caller that hits one usually needs the offending indices and values
//! to act on it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("correlation parameter rho = {rho} must satisfy |rho| < 1")]
    CorrelationOutOfRange { rho: f64 },

    #[error("correlation length delta = {delta} must be positive and finite")]
    InvalidDelta { delta: f64 },

    #[error("at least one location is required")]
    EmptyLocations,

    #[error("{context}[{index}] is not finite")]
    NonFiniteValue { context: &'static str, index: usize },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:.3e} \
         exceeds tolerance {tolerance:.3e}"
    )]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    #[error("correlation matrix diagonal entry [{index},{index}] = {value} (must be exactly 1)")]
    UnitDiagonal { index: usize, value: f64 },

    #[error("correlation entry [{row},{col}] = {value} lies outside [-1, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error(
        "matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.6e} \
         is below the floor {floor:.6e}"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64, floor: f64 },

    #[error("block composition requires at least one block")]
    EmptyBlocks,

    #[error(
        "correlation sign undetermined at [{row},{col}]: |{value:.6}| <= threshold {threshold}"
    )]
    SignIndeterminate {
        row: usize,
        col: usize,
        value: f64,
        threshold: f64,
    },

    #[error(
        "correlation signs are inconsistent at [{row},{col}]: no sign vector e \
         satisfies sign(r_ij) = e_i * e_j"
    )]
    SignInconsistent { row: usize, col: usize },

    #[error("sign vector entry [{index}] = {value} (entries must be exactly +1 or -1)")]
    InvalidSign { index: usize, value: f64 },

    #[error("noise level sigma[{index}] = {value} must be positive and finite")]
    NonPositiveSigma { index: usize, value: f64 },

    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("design matrix must have rows >= cols >= 1, got {rows}x{cols}")]
    DesignShape { rows: usize, cols: usize },

    #[error("design matrix is rank deficient: numerical rank {rank} of {cols} columns")]
    RankDeficientDesign { rank: usize, cols: usize },

    #[error(
        "covariance matrix is numerically singular: eigenvalue ratio \
         lambda_min/lambda_max = {ratio:.3e} is below the solvable floor {floor:.0e}; \
         for exactly or nearly degenerate covariances use the limit analysis \
         (subspace::limit_variance_prediction / subspace::limit_estimate) instead"
    )]
    IllConditioned { ratio: f64, floor: f64 },

    #[error(
        "full-correlation limit estimate undefined: sigma1 = {sigma1} and sigma2 = {sigma2} \
         are tied (the estimator denominator 1/sigma1 - 1/sigma2 vanishes)"
    )]
    SingularTwoPointLimit { sigma1: f64, sigma2: f64 },

    #[error(
        "covariance matrix is indefinite: min eigenvalue {min_eigenvalue:.6e} \
         below acceptance floor {floor:.6e}"
    )]
    IndefiniteCovariance { min_eigenvalue: f64, floor: f64 },

    #[error(
        "vector lies outside the design column space: residual {residual:.6e} \
         exceeds tolerance {tolerance:.3e}"
    )]
    NotInColumnSpace { residual: f64, tolerance: f64 },

    #[error("expected a unit vector, got norm {norm}")]
    NotUnitNorm { norm: f64 },

    #[error("tolerance {value} must be positive and finite")]
    InvalidTolerance { value: f64 },

    #[error(
        "limit system is underdetermined: {zero_rank} noise-free equations cannot \
         fix {params} parameters"
    )]
    UnderdeterminedLimit { zero_rank: usize, params: usize },

    #[error("signal-to-noise profile must be positive: tau({location}) = {value}")]
    NonPositiveProfile { location: f64, value: f64 },

    #[error("tabulated profile needs at least two values")]
    EmptyProfile,

    #[error("kernel argument x = {x} must be positive")]
    NonPositiveKernelArgument { x: f64 },

    #[error(
        "profile has no interior variance maximum: the derivative energy integral \
         vanishes (constant profile), so variance grows monotonically with delta"
    )]
    NoInteriorMaximum,

    #[error("{trials} trials requested; covariance estimation needs at least {minimum}")]
    TooFewTrials { trials: usize, minimum: usize },

    #[error("negative weighting requires rho > sigma2/sigma1 = {threshold:.6}; got rho = {rho}")]
    NotInNegativeWeightRegime { rho: f64, threshold: f64 },

    #[error("invalid grid: {message}")]
    InvalidGrid { message: String },

    #[error("problem file field `{field}`: {message}")]
    ProblemValidation { field: String, message: String },

    #[error("JSON error: {message}")]
    Json { message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        // Keep serde_json's line/column context; it is the most useful part.
        Error::Json {
            message: e.to_string(),
        }
    }
}
