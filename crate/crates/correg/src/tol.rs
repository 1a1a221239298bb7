//! Central numerical tolerances.
//!
//! Every floating-point threshold used by the crate lives here so the values
//! are documented once and tests can reference the exact constants instead of
//! restating magic numbers.

/// Relative floor for positive-semidefiniteness checks at construction time:
/// an eigenvalue below `-PSD_FLOOR_REL * lambda_max` fails validation, while
/// anything above it is attributed to roundoff.
pub const PSD_FLOOR_REL: f64 = 1e-10;

/// Relative symmetry tolerance for matrices that are required to be
/// symmetric (`|a_ij - a_ji| <= SYMMETRY_TOL_REL * max|a|`).
pub const SYMMETRY_TOL_REL: f64 = 1e-10;

/// Smallest eigenvalue ratio `lambda_min / lambda_max` of a covariance matrix
/// that full-rank solves will accept. Below this the system is treated as
/// numerically singular and callers are pointed at the limit-analysis path
/// (`subspace::limit_variance_prediction` / `subspace::limit_estimate`),
/// which handles exact degeneracy analytically.
pub const SOLVE_CONDITION_FLOOR: f64 = 1e-13;

/// Default minimum off-diagonal magnitude required before correlation signs
/// are considered determined (see `correlation::sign_vector`).
pub const DEFAULT_SIGN_THRESHOLD: f64 = 0.5;

/// Default residual tolerance for column-space membership decisions.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;

/// Default relative singular-value cutoff for numerical rank decisions
/// (`s_i > DEFAULT_RANK_TOL_REL * s_max` counts toward the rank).
pub const DEFAULT_RANK_TOL_REL: f64 = 1e-10;

/// Eigenvalues of a nominally PSD matrix in
/// `[-EIGEN_CLAMP_REL * lambda_max, 0)` are clamped to zero (and flagged)
/// rather than rejected.
pub const EIGEN_CLAMP_REL: f64 = 1e-10;

/// Relative clamp used by the spectral square root when sampling correlated
/// noise: eigenvalues below `SAMPLING_CLAMP_REL * lambda_max` contribute
/// nothing to the factor.
pub const SAMPLING_CLAMP_REL: f64 = 1e-12;

/// Two noise levels closer than this (relatively) are treated as tied; the
/// full-correlation limit estimate is undefined for tied noise levels.
pub const SIGMA_TIE_REL: f64 = 1e-12;

/// Below this argument the asymptotic kernels f and g switch from direct
/// evaluation to their series expansions (the series error there is far below
/// machine precision; direct evaluation would lose digits to cancellation).
pub const KERNEL_SERIES_CUTOFF: f64 = 1e-4;

/// When `1/(delta * n)` falls below this guard the lattice correlation
/// `exp(-1/(delta n))` saturates to 1 in double precision; exact-variance
/// evaluation then returns the analytic limit instead.
pub const RHO_SATURATION_GUARD: f64 = 1e-15;

/// Composite-trapezoid panel count used for integrals of tabulated
/// signal-to-noise profiles.
pub const TABULATED_QUADRATURE_PANELS: usize = 4096;
