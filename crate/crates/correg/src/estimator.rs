//! Generalized least-squares (best linear unbiased) estimation.
//!
//! The solver minimizes `χ²(β) = (y - Xβ)ᵗ Σ⁻¹ (y - Xβ)` and reports the
//! estimate, its covariance `V = (XᵗΣ⁻¹X)⁻¹`, and the weight matrix `W` with
//! `β̂ = W y`. `Σ⁻¹` is never formed explicitly: the problem is whitened in
//! the eigenbasis of `Σ` and solved by QR, which keeps `W·X = I` accurate
//! even when `Σ` is within a few decades of the conditioning floor — the
//! regime this crate exists to study.
//!
//! The two-measurement mean problem has closed forms (weights, variance, the
//! fully correlated limit estimator); they double as independent oracles for
//! the matrix path. The lattice autoregressive family admits an exact
//! tridiagonal precision matrix, provided here in sparse form.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::subspace::{self, SpectralDecomposition};
use crate::tol;
use crate::{Error, Result};

/// A validated design matrix with its numerical rank.
///
/// Construction succeeds for rank-deficient matrices — the deficiency is
/// diagnosed and stored, and rank-requiring operations reject it with a
/// specific error rather than hiding the problem at construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    rank: usize,
    rank_tolerance: f64,
}

impl DesignMatrix {
    /// Validates shape and finiteness; computes the numerical rank with the
    /// default relative singular-value cutoff
    /// [`tol::DEFAULT_RANK_TOL_REL`].
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_rank_tolerance(matrix, tol::DEFAULT_RANK_TOL_REL)
    }

    /// As [`Self::new`] with an explicit relative rank cutoff: singular
    /// values above `rank_tolerance * s_max` count toward the rank.
    pub fn with_rank_tolerance(matrix: DMatrix<f64>, rank_tolerance: f64) -> Result<Self> {
        if !rank_tolerance.is_finite() || rank_tolerance <= 0.0 {
            return Err(Error::InvalidTolerance {
                value: rank_tolerance,
            });
        }
        let (n, m) = matrix.shape();
        if m < 1 || n < m {
            return Err(Error::DesignShape { rows: n, cols: m });
        }
        for (index, value) in matrix.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: "design entry",
                    index,
                });
            }
        }
        let rank = numerical_rank(&matrix, rank_tolerance);
        Ok(DesignMatrix {
            matrix,
            rank,
            rank_tolerance,
        })
    }

    /// Number of measurements (rows).
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of parameters (columns).
    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Numerical rank at the configured cutoff.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.m()
    }

    fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::RankDeficientDesign {
                rank: self.rank,
                cols: self.m(),
            })
        }
    }
}

/// Numerical rank = number of singular values above `rel_tol * s_max`.
pub(crate) fn numerical_rank(matrix: &DMatrix<f64>, rel_tol: f64) -> usize {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return 0;
    }
    let sv = matrix.clone().singular_values();
    let s_max = sv.max();
    if s_max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * s_max).count()
}

/// Numerical rank against an absolute cutoff. Used for matrices derived from
/// a larger system (projections, eigenbasis restrictions): their rank must
/// be measured on the parent scale, or a uniformly tiny residual matrix
/// would count as full rank relative to itself.
pub(crate) fn numerical_rank_with_cutoff(matrix: &DMatrix<f64>, cutoff: f64) -> usize {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return 0;
    }
    matrix
        .clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > cutoff)
        .count()
}

/// The cutoff a design's derived matrices are ranked against:
/// `rank_tolerance × (largest singular value of the design)`.
pub(crate) fn derived_rank_cutoff(x: &DesignMatrix) -> f64 {
    let s_max = x.matrix().clone().singular_values().max();
    x.rank_tolerance() * s_max
}

/// A measurement vector with validated (finite) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    y: DVector<f64>,
}

impl Observation {
    pub fn new(y: DVector<f64>) -> Result<Self> {
        for (index, value) in y.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: "measurement",
                    index,
                });
            }
        }
        Ok(Observation { y })
    }

    pub fn from_slice(y: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(y))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.len() == 0
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.y
    }
}

/// Conditioning diagnostics for a solve: eigenvalue extremes of the noise
/// covariance `Σ` and of the normal matrix `XᵗΣ⁻¹X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub covariance_eigen_min: f64,
    pub covariance_eigen_max: f64,
    /// `covariance_eigen_min / covariance_eigen_max`; solves require this to
    /// stay above [`tol::SOLVE_CONDITION_FLOOR`].
    pub covariance_eigen_ratio: f64,
    pub normal_eigen_min: f64,
    pub normal_eigen_max: f64,
    pub normal_eigen_ratio: f64,
}

/// The output of a generalized least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BlueResult {
    /// Fitted coefficients `β̂` (length m).
    pub beta_hat: DVector<f64>,
    /// Estimator covariance `V = (XᵗΣ⁻¹X)⁻¹` (m×m, symmetric).
    pub covariance: DMatrix<f64>,
    /// Weight matrix `W` (m×n) with `β̂ = W y` and `W X = I`.
    pub weights: DMatrix<f64>,
    /// `χ²` at the optimum.
    pub chi_squared: f64,
    pub condition: ConditionReport,
}

#[derive(Serialize)]
struct BlueResultWire<'a> {
    beta_hat: &'a [f64],
    covariance: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    chi_squared: f64,
    condition: &'a ConditionReport,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

impl BlueResult {
    /// JSON form with `beta_hat`, `covariance`, `weights`, `chi_squared`,
    /// and `condition` fields.
    pub fn to_json(&self) -> String {
        let wire = BlueResultWire {
            beta_hat: self.beta_hat.as_slice(),
            covariance: matrix_rows(&self.covariance),
            weights: matrix_rows(&self.weights),
            chi_squared: self.chi_squared,
            condition: &self.condition,
        };
        serde_json::to_string_pretty(&wire).expect("result serializes")
    }
}

/// Shared whitened-QR solve: everything about the fit except the data.
struct GlsCore {
    weights: DMatrix<f64>,
    covariance: DMatrix<f64>,
    condition: ConditionReport,
    /// Rows of the whitened design `A = Λ^{-1/2} Qᵗ X`.
    whitened_design: DMatrix<f64>,
    spectral: SpectralDecomposition,
}

fn solve_gls(x: &DesignMatrix, sigma: &DMatrix<f64>) -> Result<GlsCore> {
    x.require_full_rank()?;
    let n = x.n();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "covariance size vs. design rows",
            expected: n,
            actual: sigma.nrows(),
        });
    }
    let spectral = subspace::spectral_decompose(sigma)?;
    let ratio = spectral.condition_ratio();
    if ratio < tol::SOLVE_CONDITION_FLOOR {
        return Err(Error::IllConditioned {
            ratio,
            floor: tol::SOLVE_CONDITION_FLOOR,
        });
    }
    let lambdas = spectral.eigenvalues();
    let q = spectral.q();

    // Whiten: A = Λ^{-1/2} Qᵗ X. Solving min ‖Λ^{-1/2}Qᵗ(y - Xβ)‖² by QR of
    // A keeps W·X = I accurate near the conditioning floor, where forming
    // XᵗΣ⁻¹X explicitly would square the condition number.
    let qt_x = q.transpose() * x.matrix();
    let mut a = qt_x;
    for (i, lambda) in lambdas.iter().enumerate() {
        a.row_mut(i).scale_mut(1.0 / lambda.sqrt());
    }

    let m = x.m();
    let qr = a.clone().qr();
    let q_a = qr.q();
    let r_a = qr.r();

    // Normal-matrix conditioning from the singular values of R_A (equal to
    // those of A).
    let sv = r_a.clone().singular_values();
    let s_max = sv.max();
    let s_min = sv.min();
    let normal_ratio = if s_max > 0.0 {
        (s_min / s_max).powi(2)
    } else {
        0.0
    };
    let condition = ConditionReport {
        covariance_eigen_min: lambdas[n - 1],
        covariance_eigen_max: lambdas[0],
        covariance_eigen_ratio: ratio,
        normal_eigen_min: s_min * s_min,
        normal_eigen_max: s_max * s_max,
        normal_eigen_ratio: normal_ratio,
    };

    // W = R_A⁻¹ Q_Aᵗ Λ^{-1/2} Qᵗ and V = R_A⁻¹ R_A⁻ᵗ via triangular solves.
    let mut whitener = q.transpose().clone_owned();
    for (i, lambda) in lambdas.iter().enumerate() {
        whitener.row_mut(i).scale_mut(1.0 / lambda.sqrt());
    }
    let rhs = q_a.transpose() * &whitener;
    let weights = r_a
        .solve_upper_triangular(&rhs)
        .ok_or(Error::IllConditioned {
            ratio: normal_ratio,
            floor: tol::SOLVE_CONDITION_FLOOR,
        })?;
    let r_inv =
        r_a.solve_upper_triangular(&DMatrix::identity(m, m))
            .ok_or(Error::IllConditioned {
                ratio: normal_ratio,
                floor: tol::SOLVE_CONDITION_FLOOR,
            })?;
    let v = &r_inv * r_inv.transpose();
    let covariance = 0.5 * (&v + v.transpose());

    Ok(GlsCore {
        weights,
        covariance,
        condition,
        whitened_design: a,
        spectral,
    })
}

/// Fits `β̂ = argmin (y - Xβ)ᵗ Σ⁻¹ (y - Xβ)` and reports estimate,
/// covariance, weights, `χ²` at the optimum, and conditioning diagnostics.
pub fn blue_fit(y: &Observation, x: &DesignMatrix, sigma: &DMatrix<f64>) -> Result<BlueResult> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "measurement count vs. design rows",
            expected: x.n(),
            actual: y.len(),
        });
    }
    let core = solve_gls(x, sigma)?;
    let beta_hat = &core.weights * y.vector();
    // χ² in the whitened basis: ‖b - A β̂‖² with b = Λ^{-1/2} Qᵗ y.
    let lambdas = core.spectral.eigenvalues();
    let mut b = core.spectral.q().transpose() * y.vector();
    for i in 0..b.len() {
        b[i] /= lambdas[i].sqrt();
    }
    let resid = &b - &core.whitened_design * &beta_hat;
    let chi_squared = resid.norm_squared();
    Ok(BlueResult {
        beta_hat,
        covariance: core.covariance,
        weights: core.weights,
        chi_squared,
        condition: core.condition,
    })
}

/// Estimator covariance `V = (XᵗΣ⁻¹X)⁻¹`; independent of the data.
pub fn estimator_covariance(x: &DesignMatrix, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(solve_gls(x, sigma)?.covariance)
}

/// Weight matrix `W` (m×n) of the linear estimator `β̂ = W y`.
pub fn estimator_weights(x: &DesignMatrix, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(solve_gls(x, sigma)?.weights)
}

/// The goodness-of-fit quadratic form `χ²(β) = (y - Xβ)ᵗ Σ⁻¹ (y - Xβ)` at an
/// arbitrary `β` (level sets of this function are the confidence ellipses of
/// the fit).
pub fn chi_squared(
    y: &Observation,
    x: &DesignMatrix,
    beta: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "measurement count vs. design rows",
            expected: x.n(),
            actual: y.len(),
        });
    }
    if beta.len() != x.m() {
        return Err(Error::DimensionMismatch {
            context: "coefficient count vs. design columns",
            expected: x.m(),
            actual: beta.len(),
        });
    }
    if sigma.nrows() != y.len() || sigma.ncols() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "covariance size vs. measurement count",
            expected: y.len(),
            actual: sigma.nrows(),
        });
    }
    let spectral = subspace::spectral_decompose(sigma)?;
    let ratio = spectral.condition_ratio();
    if ratio < tol::SOLVE_CONDITION_FLOOR {
        return Err(Error::IllConditioned {
            ratio,
            floor: tol::SOLVE_CONDITION_FLOOR,
        });
    }
    let resid = y.vector() - x.matrix() * beta;
    let z = spectral.q().transpose() * resid;
    let lambdas = spectral.eigenvalues();
    Ok(z.iter().zip(lambdas).map(|(zi, li)| zi * zi / li).sum())
}

fn check_sigma_pair(sigma1: f64, sigma2: f64) -> Result<()> {
    for (index, s) in [sigma1, sigma2].into_iter().enumerate() {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::NonPositiveSigma { index, value: s });
        }
    }
    Ok(())
}

fn sigmas_tied(sigma1: f64, sigma2: f64) -> bool {
    (sigma1 - sigma2).abs() <= tol::SIGMA_TIE_REL * sigma1.max(sigma2)
}

/// Variance of the best linear estimate of a common mean from two
/// measurements with noise levels `σ₁, σ₂` and correlation `ρ`:
/// `V = (1 - ρ²)/(τ₁² - 2ρτ₁τ₂ + τ₂²)` with `τᵢ = 1/σᵢ`.
///
/// The boundary `|ρ| = 1` is evaluated by its analytic limit: exactly `0`
/// when `σ₁ ≠ σ₂` (or `ρ = -1`), and `σ₁²` in the exceptional tied case
/// `ρ = 1, σ₁ = σ₂` (ties detected at relative [`tol::SIGMA_TIE_REL`]).
pub fn two_point_mean_variance(sigma1: f64, sigma2: f64, rho: f64) -> Result<f64> {
    check_sigma_pair(sigma1, sigma2)?;
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    let tied = sigmas_tied(sigma1, sigma2);
    if rho == 1.0 {
        return Ok(if tied { sigma1 * sigma1 } else { 0.0 });
    }
    if rho == -1.0 {
        return Ok(0.0);
    }
    let t1 = 1.0 / sigma1;
    let t2 = 1.0 / sigma2;
    // For ρ > 0 the denominator τ₁² - 2ρτ₁τ₂ + τ₂² cancels catastrophically
    // as ρ → 1 with τ₁ ≈ τ₂; the regrouped form isolates the small factors.
    let denom = if rho > 0.0 {
        (1.0 - rho) * (t1 * t1 + t2 * t2) + rho * (t1 - t2) * (t1 - t2)
    } else {
        t1 * t1 - 2.0 * rho * t1 * t2 + t2 * t2
    };
    Ok((1.0 - rho) * (1.0 + rho) / denom)
}

/// Weights `(w₁, w₂)` of the best linear estimate of a common mean from two
/// correlated measurements: `μ̂ = w₁y₁ + w₂y₂` with
/// `wᵢ = (τᵢ² - ρτ₁τ₂)/(τ₁² - 2ρτ₁τ₂ + τ₂²)`.
///
/// `w₁` passes through zero at `ρ = σ₂/σ₁` (for `σ₁ ≥ σ₂`) and is negative
/// beyond it. Defined at `|ρ| = 1` as long as the denominator is nonzero,
/// i.e. except the tied case `ρ = 1, σ₁ = σ₂`.
pub fn two_point_weights(sigma1: f64, sigma2: f64, rho: f64) -> Result<(f64, f64)> {
    check_sigma_pair(sigma1, sigma2)?;
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    if rho == 1.0 && sigmas_tied(sigma1, sigma2) {
        return Err(Error::SingularTwoPointLimit { sigma1, sigma2 });
    }
    let t1 = 1.0 / sigma1;
    let t2 = 1.0 / sigma2;
    let denom = if rho > 0.0 {
        (1.0 - rho) * (t1 * t1 + t2 * t2) + rho * (t1 - t2) * (t1 - t2)
    } else {
        t1 * t1 - 2.0 * rho * t1 * t2 + t2 * t2
    };
    Ok((
        (t1 * t1 - rho * t1 * t2) / denom,
        (t2 * t2 - rho * t1 * t2) / denom,
    ))
}

/// The fully correlated (`ρ → 1`) limit of the two-measurement mean
/// estimate: `μ̂ = (τ₁y₁ - τ₂y₂)/(τ₁ - τ₂)`.
///
/// When the noise is perfectly correlated, both measurements carry the same
/// noise realization scaled by their `σ`; the difference above cancels it
/// exactly, recovering the mean with zero uncertainty. Undefined for tied
/// noise levels (the exceptional case where the limit variance is `σ²`
/// instead of zero).
pub fn two_point_full_correlation_estimate(
    y1: f64,
    y2: f64,
    sigma1: f64,
    sigma2: f64,
) -> Result<f64> {
    check_sigma_pair(sigma1, sigma2)?;
    for (index, v) in [y1, y2].into_iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "measurement",
                index,
            });
        }
    }
    if sigmas_tied(sigma1, sigma2) {
        return Err(Error::SingularTwoPointLimit { sigma1, sigma2 });
    }
    let t1 = 1.0 / sigma1;
    let t2 = 1.0 / sigma2;
    Ok((t1 * y1 - t2 * y2) / (t1 - t2))
}

/// The inverse of the lattice autoregressive correlation matrix
/// (`ϱ_ij = ρ^|i-j|`), which is exactly tridiagonal; stored as its three
/// diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalPrecision {
    diag: Vec<f64>,
    off: Vec<f64>,
}

/// Tridiagonal `R⁻¹` for the lattice autoregressive family:
/// `1/(1-ρ²) × [1, -ρ; -ρ, 1+ρ², -ρ; ...; -ρ, 1]` (boundary diagonal entries
/// `1/(1-ρ²)`, interior `(1+ρ²)/(1-ρ²)`).
pub fn ar1_precision(n_points: usize, rho: f64) -> Result<TridiagonalPrecision> {
    if n_points == 0 {
        return Err(Error::EmptyLocations);
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    if n_points == 1 {
        return Ok(TridiagonalPrecision {
            diag: vec![1.0],
            off: vec![],
        });
    }
    let scale = 1.0 / (1.0 - rho * rho);
    let mut diag = vec![(1.0 + rho * rho) * scale; n_points];
    diag[0] = scale;
    diag[n_points - 1] = scale;
    let off = vec![-rho * scale; n_points - 1];
    Ok(TridiagonalPrecision { diag, off })
}

impl TridiagonalPrecision {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// `uᵗ (R⁻¹) v` in O(n).
    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.n();
        if u.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "quadratic form operand length",
                expected: n,
                actual: if u.len() != n { u.len() } else { v.len() },
            });
        }
        let mut total = 0.0;
        for i in 0..n {
            total += u[i] * self.diag[i] * v[i];
            if i + 1 < n {
                total += self.off[i] * (u[i] * v[i + 1] + u[i + 1] * v[i]);
            }
        }
        Ok(total)
    }
}
