//! Spectral analysis of the noise covariance and the noise-free subspace.
//!
//! As the measurement correlations approach unit magnitude, the covariance
//! `Σ` degenerates: some eigenvalues collapse to zero, and the corresponding
//! eigendirections carry *noise-free* linear combinations of the data. What
//! happens to the best linear estimator then hinges on geometry alone:
//!
//! - if the top eigendirection `v₁` (the surviving noisy direction of a
//!   rank-one limit) stays **outside** the design's column space, every
//!   parameter combination is determined exactly and the total estimator
//!   variance collapses to zero;
//! - if `v₁` lies **inside** the column space, exactly one reparametrized
//!   combination keeps all the noise (variance equal to the trace of the
//!   limiting covariance) while the rest become exact.
//!
//! This module provides the eigendecomposition with that degeneracy handled
//! deliberately ([`spectral_decompose`]), the transformation of a regression
//! problem into the eigenbasis, the membership test, the reparametrization
//! that isolates the noisy combination, structural predictions of the limit
//! ([`limit_variance_prediction`], [`limit_variance_prediction_from_covariance`]),
//! and the exact solve of the noise-free equations ([`limit_estimate`]).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::correlation::SignVector;
use crate::estimator::{
    derived_rank_cutoff, numerical_rank_with_cutoff, DesignMatrix, Observation,
};
use crate::tol;
use crate::{Error, Result};

/// Tolerance on `|‖v‖ - 1|` for vectors required to be unit length.
const UNIT_NORM_TOL: f64 = 1e-10;

/// Eigendecomposition of a symmetric positive-semidefinite matrix with
/// eigenvalues sorted descending and tiny negative eigenvalues (roundoff
/// from near-singular inputs) clamped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    q: DMatrix<f64>,
    clamped: bool,
}

/// Decomposes `Σ = Q diag(λ) Qᵗ` with `λ₁ ≥ … ≥ λₙ ≥ 0`.
///
/// Asymmetry beyond [`tol::SYMMETRY_TOL_REL`] (relative to the largest
/// entry) is rejected; eigenvalues in `[-EIGEN_CLAMP_REL·λ₁, 0)` are clamped
/// to zero and flagged; anything more negative is rejected as indefinite.
pub fn spectral_decompose(sigma: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let (rows, cols) = sigma.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::EmptyLocations);
    }
    let n = rows;
    let mut max_abs = 0.0f64;
    for (index, value) in sigma.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "covariance entry",
                index,
            });
        }
        max_abs = max_abs.max(value.abs());
    }
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asymmetry = max_asymmetry.max((sigma[(i, j)] - sigma[(j, i)]).abs());
        }
    }
    let symmetry_tol = tol::SYMMETRY_TOL_REL * max_abs.max(1e-300);
    if max_asymmetry > symmetry_tol {
        return Err(Error::NotSymmetric {
            max_asymmetry,
            tolerance: symmetry_tol,
        });
    }
    let symmetrized = 0.5 * (sigma + sigma.transpose());
    let eigen = SymmetricEigen::new(symmetrized);

    // Sort descending, permuting eigenvectors alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap()
    });
    let mut eigenvalues = Vec::with_capacity(n);
    let mut q = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eigen.eigenvalues[src]);
        q.column_mut(dst).copy_from(&eigen.eigenvectors.column(src));
    }

    let lambda_max = eigenvalues[0].max(0.0);
    let floor = -tol::EIGEN_CLAMP_REL * lambda_max;
    let lambda_min = eigenvalues[n - 1];
    if lambda_min < floor {
        return Err(Error::IndefiniteCovariance {
            min_eigenvalue: lambda_min,
            floor,
        });
    }
    let mut clamped = false;
    for lambda in &mut eigenvalues {
        if *lambda < 0.0 {
            *lambda = 0.0;
            clamped = true;
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        q,
        clamped,
    })
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues, descending, all `≥ 0`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    /// Orthonormal eigenvectors as columns, ordered like the eigenvalues.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// The `j`-th eigenvector (column of `Q`).
    pub fn eigenvector(&self, j: usize) -> DVector<f64> {
        self.q.column(j).clone_owned()
    }

    /// Whether any small negative eigenvalue was clamped to zero.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Number of eigenvalues above `rel_cutoff · λ₁`.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        let lambda_max = self.eigenvalues[0];
        if lambda_max <= 0.0 {
            return 0;
        }
        self.eigenvalues
            .iter()
            .filter(|&&l| l > rel_cutoff * lambda_max)
            .count()
    }

    /// `λₙ / λ₁` after clamping (0 for singular, 0 for the zero matrix).
    pub fn condition_ratio(&self) -> f64 {
        let lambda_max = self.eigenvalues[0];
        if lambda_max <= 0.0 {
            return 0.0;
        }
        self.eigenvalues[self.n() - 1] / lambda_max
    }
}

/// Outcome of a column-space membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Norm of the component of the vector orthogonal to the column space.
    pub residual: f64,
    pub tolerance: f64,
}

/// Tests whether the unit vector `v` lies in the column space of the design,
/// reporting the orthogonal residual either way. Membership means
/// `residual ≤ tolerance`.
pub fn column_space_membership(
    x: &DesignMatrix,
    v: &DVector<f64>,
    tolerance: f64,
) -> Result<Membership> {
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(Error::InvalidTolerance { value: tolerance });
    }
    if v.len() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "vector length vs. design rows",
            expected: x.n(),
            actual: v.len(),
        });
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm { norm });
    }
    let svd = x.matrix().clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let s_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > x.rank_tolerance() * s_max)
        .count();
    let basis = u.columns(0, rank);
    let projected = basis * (basis.transpose() * v);
    let residual = (v - projected).norm();
    Ok(Membership {
        member: residual <= tolerance,
        residual,
        tolerance,
    })
}

/// A regression problem expressed in the eigenbasis of its noise covariance:
/// `Z = X̃ β + diag(λ)^{1/2} ξ` with uncorrelated unit-variance `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSystem {
    /// Rotated data `Z = Qᵗ y`.
    pub z: DVector<f64>,
    /// Rotated design `X̃ = Qᵗ X`.
    pub x_tilde: DMatrix<f64>,
    /// Noise variances per rotated row (the eigenvalues).
    pub lambdas: Vec<f64>,
}

/// Rotates `(y, X)` into the covariance eigenbasis. Rows whose eigenvalue is
/// zero are exact (noise-free) linear equations `Z_j = (X̃ β)_j`.
pub fn transform_to_eigenbasis(
    y: &Observation,
    x: &DesignMatrix,
    spectral: &SpectralDecomposition,
) -> Result<TransformedSystem> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "measurement count vs. design rows",
            expected: x.n(),
            actual: y.len(),
        });
    }
    if spectral.n() != x.n() {
        return Err(Error::DimensionMismatch {
            context: "eigenbasis size vs. design rows",
            expected: x.n(),
            actual: spectral.n(),
        });
    }
    Ok(TransformedSystem {
        z: spectral.q().transpose() * y.vector(),
        x_tilde: spectral.q().transpose() * x.matrix(),
        lambdas: spectral.eigenvalues().to_vec(),
    })
}

/// The design restricted to eigendirections after the top `drop`, with its
/// numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDesign {
    /// Rows are `vⱼᵗ X` for `j > drop` (an `(n - drop) × m` matrix).
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

/// Drops the top `drop` eigendirections and returns the reduced design
/// `[v_{drop+1}, …, vₙ]ᵗ X` with its numerical rank (at the design's rank
/// tolerance). With `drop` equal to the rank of the limiting covariance,
/// the reduced rows are exactly the noise-free equations.
pub fn reduced_design(
    x: &DesignMatrix,
    spectral: &SpectralDecomposition,
    drop: usize,
) -> Result<ReducedDesign> {
    let n = x.n();
    if spectral.n() != n {
        return Err(Error::DimensionMismatch {
            context: "eigenbasis size vs. design rows",
            expected: n,
            actual: spectral.n(),
        });
    }
    if drop >= n {
        return Err(Error::InvalidGrid {
            message: format!("cannot drop {drop} of {n} eigendirections"),
        });
    }
    let reduced = spectral.q().columns(drop, n - drop).transpose() * x.matrix();
    let rank = numerical_rank_with_cutoff(&reduced, derived_rank_cutoff(x));
    Ok(ReducedDesign {
        matrix: reduced,
        rank,
    })
}

/// Builds the parameter transformation `W` (m×m, invertible) such that the
/// first column of `X W` is `v₁` and all remaining columns of `X W` are
/// orthogonal to `v₁`.
///
/// In the reparametrized problem `γ = W⁻¹ β`, the first combination `γ₁`
/// absorbs all the noise of a rank-one-limit covariance while the others are
/// estimated exactly. Requires `v₁` to lie in the design's column space
/// (otherwise no parameter combination can reproduce `v₁`, and the caller
/// should use the exact-determination path instead).
pub fn reparametrize(x: &DesignMatrix, v1: &DVector<f64>) -> Result<DMatrix<f64>> {
    if !x.is_full_rank() {
        return Err(Error::RankDeficientDesign {
            rank: x.rank(),
            cols: x.m(),
        });
    }
    let membership = column_space_membership(x, v1, tol::DEFAULT_MEMBERSHIP_TOL)?;
    if !membership.member {
        return Err(Error::NotInColumnSpace {
            residual: membership.residual,
            tolerance: membership.tolerance,
        });
    }
    let m = x.m();

    // First column: the coefficient vector with X c = v₁ (least squares;
    // exact up to the membership residual).
    let svd = x.matrix().clone().svd(true, true);
    let c = svd.solve(v1, 0.0).map_err(|_| Error::RankDeficientDesign {
        rank: x.rank(),
        cols: m,
    })?;

    if m == 1 {
        return Ok(DMatrix::from_element(1, 1, c[0]));
    }

    // Remaining columns: a Householder reflector H with H e₁ ∝ g = Xᵗ v₁;
    // its columns 2..m are orthogonal to g, so the corresponding columns of
    // X W are orthogonal to v₁ (⟨X H e_j, v₁⟩ = ⟨H e_j, g⟩ = 0).
    let g = x.matrix().transpose() * v1;
    let g_hat = &g / g.norm();
    let sign = if g_hat[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = g_hat.clone();
    u[0] += sign;
    let h = DMatrix::identity(m, m) - (2.0 / u.norm_squared()) * (&u * u.transpose());

    let mut w = DMatrix::zeros(m, m);
    w.column_mut(0).copy_from(&c);
    for j in 1..m {
        w.column_mut(j).copy_from(&h.column(j));
    }
    Ok(w)
}

/// The limiting top eigendirection of a covariance whose correlations all
/// approach `±1`: `v₁ⱼ = eⱼ σⱼ / √(Σ σ²)`. Built analytically from the noise
/// levels and the sign pattern — eigendecomposing a nearly singular matrix
/// would be unstable exactly where this vector decides the outcome.
pub fn limiting_direction(sigmas: &[f64], e: &SignVector) -> Result<DVector<f64>> {
    if sigmas.is_empty() {
        return Err(Error::EmptyLocations);
    }
    if e.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            context: "sign vector length vs. noise levels",
            expected: sigmas.len(),
            actual: e.len(),
        });
    }
    for (index, &value) in sigmas.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveSigma { index, value });
        }
    }
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    let scale = total.sqrt();
    Ok(DVector::from_iterator(
        sigmas.len(),
        sigmas.iter().zip(e.entries()).map(|(s, e)| e * s / scale),
    ))
}

/// Structural prediction of estimator behavior in a degenerate-covariance
/// limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitReport {
    /// Whether the surviving noisy direction `v₁` lies in the design's
    /// column space.
    pub v1_in_column_space: bool,
    pub membership_residual: f64,
    pub membership_tolerance: f64,
    /// Number of linearly independent parameter combinations determined
    /// exactly (zero variance) in the limit.
    pub exact_dimension: usize,
    /// `m - exact_dimension`: combinations that retain noise.
    pub noisy_dimension: usize,
    /// Predicted total variance of the noisy combinations: `0` when
    /// everything is exact, otherwise the trace of the limiting covariance
    /// (`Σ σⱼ²` in the rank-one limit).
    pub predicted_total_variance: f64,
    /// Numerical rank of the design restricted to the noise-free
    /// eigendirections.
    pub reduced_rank: usize,
    /// Rank of the limiting covariance.
    pub covariance_limit_rank: usize,
}

impl LimitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Predicts the limiting estimator behavior when all correlations approach
/// the rank-one pattern `e eᵗ` with noise levels `σ`.
///
/// Builds the limiting direction `v₁` analytically, tests membership, and
/// reports: `v₁` outside the column space ⟹ all `m` combinations exact and
/// total variance → 0; `v₁` inside ⟹ exactly one noisy combination with
/// variance `Σ σⱼ²`.
pub fn limit_variance_prediction(
    x: &DesignMatrix,
    sigmas: &[f64],
    e: &SignVector,
) -> Result<LimitReport> {
    if !x.is_full_rank() {
        return Err(Error::RankDeficientDesign {
            rank: x.rank(),
            cols: x.m(),
        });
    }
    let (n, m) = (x.n(), x.m());
    if n <= m {
        return Err(Error::UnderdeterminedLimit {
            zero_rank: n.saturating_sub(1),
            params: m,
        });
    }
    if sigmas.len() != n {
        return Err(Error::DimensionMismatch {
            context: "noise levels vs. design rows",
            expected: n,
            actual: sigmas.len(),
        });
    }
    let v1 = limiting_direction(sigmas, e)?;
    let membership = column_space_membership(x, &v1, tol::DEFAULT_MEMBERSHIP_TOL)?;

    // Rank of the design seen by the noise-free directions (the orthogonal
    // complement of v₁): projecting out v₁ is equivalent to applying
    // [v₂ … vₙ]ᵗ.
    let projected = x.matrix() - &v1 * (v1.transpose() * x.matrix());
    let exact_dimension = numerical_rank_with_cutoff(&projected, derived_rank_cutoff(x));
    let noisy_dimension = m - exact_dimension;
    let predicted_total_variance = if noisy_dimension == 0 {
        0.0
    } else {
        sigmas.iter().map(|s| s * s).sum()
    };
    Ok(LimitReport {
        v1_in_column_space: membership.member,
        membership_residual: membership.residual,
        membership_tolerance: membership.tolerance,
        exact_dimension,
        noisy_dimension,
        predicted_total_variance,
        reduced_rank: exact_dimension,
        covariance_limit_rank: 1,
    })
}

/// As [`limit_variance_prediction`], but for an arbitrary (rank `r′ < n`)
/// limiting covariance given explicitly: the noise-free equations are the
/// `n - r′` zero-eigenvalue rows, and the number of exactly determined
/// combinations is the rank of the design restricted to them (at most
/// `min(m, n - r′)`).
pub fn limit_variance_prediction_from_covariance(
    x: &DesignMatrix,
    sigma_limit: &DMatrix<f64>,
) -> Result<LimitReport> {
    if !x.is_full_rank() {
        return Err(Error::RankDeficientDesign {
            rank: x.rank(),
            cols: x.m(),
        });
    }
    let (n, m) = (x.n(), x.m());
    if sigma_limit.nrows() != n || sigma_limit.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "covariance size vs. design rows",
            expected: n,
            actual: sigma_limit.nrows(),
        });
    }
    let spectral = spectral_decompose(sigma_limit)?;
    let r_prime = spectral.rank(tol::DEFAULT_RANK_TOL_REL);
    let membership =
        column_space_membership(x, &spectral.eigenvector(0), tol::DEFAULT_MEMBERSHIP_TOL)?;
    let exact_dimension = if r_prime >= n {
        0
    } else {
        reduced_design(x, &spectral, r_prime)?.rank
    };
    let noisy_dimension = m - exact_dimension;
    let predicted_total_variance = if noisy_dimension == 0 {
        0.0
    } else {
        sigma_limit.trace()
    };
    Ok(LimitReport {
        v1_in_column_space: membership.member,
        membership_residual: membership.residual,
        membership_tolerance: membership.tolerance,
        exact_dimension,
        noisy_dimension,
        predicted_total_variance,
        reduced_rank: exact_dimension,
        covariance_limit_rank: r_prime,
    })
}

/// Solves the noise-free equations of a degenerate covariance exactly:
/// the zero-eigenvalue rows of the transformed system, `vⱼᵗ X β = vⱼᵗ y`,
/// determine `β` with no noise at all when their design block has full
/// column rank. This is the estimator the generic solver points to when the
/// covariance sits below its conditioning floor.
pub fn limit_estimate(
    y: &Observation,
    x: &DesignMatrix,
    spectral: &SpectralDecomposition,
) -> Result<DVector<f64>> {
    if !x.is_full_rank() {
        return Err(Error::RankDeficientDesign {
            rank: x.rank(),
            cols: x.m(),
        });
    }
    let (n, m) = (x.n(), x.m());
    if y.len() != n || spectral.n() != n {
        return Err(Error::DimensionMismatch {
            context: "measurement count vs. design rows",
            expected: n,
            actual: if y.len() != n { y.len() } else { spectral.n() },
        });
    }
    let r_prime = spectral.rank(tol::DEFAULT_RANK_TOL_REL);
    if r_prime >= n {
        return Err(Error::UnderdeterminedLimit {
            zero_rank: 0,
            params: m,
        });
    }
    let zero_block = spectral.q().columns(r_prime, n - r_prime);
    let design_block = zero_block.transpose() * x.matrix();
    let data_block = zero_block.transpose() * y.vector();
    let rank = numerical_rank_with_cutoff(&design_block, derived_rank_cutoff(x));
    if rank < m {
        return Err(Error::UnderdeterminedLimit {
            zero_rank: rank,
            params: m,
        });
    }
    let svd = design_block.svd(true, true);
    svd.solve(&data_block, 0.0)
        .map_err(|_| Error::UnderdeterminedLimit {
            zero_rank: rank,
            params: m,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{
        ar1_correlation, block_correlation, rank_one_limit, CovarianceModel, SignVector,
    };
    use crate::estimator::{
        blue_fit, two_point_full_correlation_estimate, DesignMatrix, Observation,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{DMatrix, DVector};

    fn ones_design(n: usize) -> DesignMatrix {
        DesignMatrix::new(DMatrix::from_element(n, 1, 1.0)).unwrap()
    }

    fn rank_one_sigma(sigmas: &[f64]) -> DMatrix<f64> {
        let e = SignVector::plus(sigmas.len()).unwrap();
        CovarianceModel::new(sigmas.to_vec(), rank_one_limit(&e))
            .unwrap()
            .assemble()
    }

    #[test]
    fn decomposition_of_a_rank_one_covariance() {
        // σ = (1, 2), fully correlated: Σ = [[1,2],[2,4]], λ = (5, 0),
        // v₁ ∝ (1, 2)/√5.
        let sigma = rank_one_sigma(&[1.0, 2.0]);
        let spec = spectral_decompose(&sigma).unwrap();
        assert_relative_eq!(spec.lambda(0), 5.0, max_relative = 1e-12);
        assert_abs_diff_eq!(spec.lambda(1), 0.0, epsilon = 5e-10);
        let v1 = spec.eigenvector(0);
        let expected = DVector::from_row_slice(&[1.0, 2.0]) / 5.0f64.sqrt();
        assert_abs_diff_eq!(v1.dot(&expected).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decomposition_of_identity_and_two_point_limit() {
        let spec = spectral_decompose(&DMatrix::identity(3, 3)).unwrap();
        for j in 0..3 {
            assert_eq!(spec.lambda(j), 1.0);
        }

        // Fully correlated two-point covariance keeps only the trace.
        let sigma = rank_one_sigma(&[1.0, 0.5]);
        let spec = spectral_decompose(&sigma).unwrap();
        assert_relative_eq!(spec.lambda(0), 1.25, max_relative = 1e-12);
        assert_abs_diff_eq!(spec.lambda(1), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn decomposition_invariants_hold() {
        let model =
            CovarianceModel::new(vec![1.0, 0.4, 2.0, 0.7], ar1_correlation(4, -0.93).unwrap())
                .unwrap();
        let sigma = model.assemble();
        let spec = spectral_decompose(&sigma).unwrap();

        // Sorted descending.
        for j in 1..4 {
            assert!(spec.lambda(j - 1) >= spec.lambda(j));
        }
        // Orthonormal columns.
        let qtq = spec.q().transpose() * spec.q();
        assert!((qtq - DMatrix::identity(4, 4)).amax() < 1e-10);
        // Reconstruction.
        let lam = DMatrix::from_diagonal(&DVector::from_row_slice(spec.eigenvalues()));
        let rebuilt = spec.q() * lam * spec.q().transpose();
        assert!((&rebuilt - &sigma).amax() < 1e-10 * sigma.amax());
    }

    #[test]
    fn decomposition_rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            spectral_decompose(&asym),
            Err(Error::NotSymmetric { .. })
        ));

        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match spectral_decompose(&indefinite) {
            Err(Error::IndefiniteCovariance { min_eigenvalue, .. }) => {
                assert_relative_eq!(min_eigenvalue, -1.0, max_relative = 1e-12);
            }
            other => panic!("expected indefinite rejection, got {other:?}"),
        }

        let rect = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(matches!(
            spectral_decompose(&rect),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn near_singular_covariance_is_clamped_not_rejected() {
        let model =
            CovarianceModel::new(vec![1.0; 6], ar1_correlation(6, 1.0 - 1e-13).unwrap()).unwrap();
        let spec = spectral_decompose(&model.assemble()).unwrap();
        assert!(spec.eigenvalues().iter().all(|&l| l >= 0.0));
        assert!(spec.condition_ratio() >= 0.0);
    }

    #[test]
    fn rank_counts_meaningful_eigenvalues() {
        let sigma = rank_one_sigma(&[1.0, 0.5, 2.0]);
        let spec = spectral_decompose(&sigma).unwrap();
        assert_eq!(spec.rank(1e-10), 1);

        let spec = spectral_decompose(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(spec.rank(1e-10), 4);
    }

    #[test]
    fn membership_distinguishes_aligned_and_skew_vectors() {
        let x = ones_design(2);
        let inside = DVector::from_row_slice(&[1.0, 1.0]) / 2.0f64.sqrt();
        let m = column_space_membership(&x, &inside, 1e-8).unwrap();
        assert!(m.member);
        assert!(m.residual < 1e-12);

        let outside = DVector::from_row_slice(&[1.0, 2.0]) / 5.0f64.sqrt();
        let m = column_space_membership(&x, &outside, 1e-8).unwrap();
        assert!(!m.member);
        // Distance of (1,2)/√5 from span{(1,1)}: 1/√10.
        assert_relative_eq!(m.residual, 0.31622776601683794, max_relative = 1e-12);

        // A normalized column of X is always a member.
        let x2 = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.5, 1.0, 1.0, 1.0, 4.0],
        ))
        .unwrap();
        let col = x2.matrix().column(1).clone_owned();
        let unit = &col / col.norm();
        assert!(column_space_membership(&x2, &unit, 1e-8).unwrap().member);
    }

    #[test]
    fn membership_validates_inputs() {
        let x = ones_design(2);
        let not_unit = DVector::from_row_slice(&[1.0, 1.0]);
        assert!(matches!(
            column_space_membership(&x, &not_unit, 1e-8),
            Err(Error::NotUnitNorm { .. })
        ));
        let unit = DVector::from_row_slice(&[1.0, 0.0]);
        assert!(matches!(
            column_space_membership(&x, &unit, 0.0),
            Err(Error::InvalidTolerance { .. })
        ));
        let wrong_len = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            column_space_membership(&x, &wrong_len, 1e-8),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_covariance_transform_is_identity() {
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0],
        ))
        .unwrap();
        let y = Observation::from_slice(&[0.3, 1.1, 2.4]).unwrap();
        let spec = spectral_decompose(&DMatrix::identity(3, 3)).unwrap();
        let t = transform_to_eigenbasis(&y, &x, &spec).unwrap();
        // Eigenvectors of the identity are coordinate axes (up to order and
        // sign); nalgebra returns them in place, so the transform is exact.
        assert!((&t.z - y.vector()).amax() < 1e-14);
        assert!((&t.x_tilde - x.matrix()).amax() < 1e-14);
    }

    #[test]
    fn transform_is_an_isometry_and_invertible() {
        let model =
            CovarianceModel::new(vec![0.3, 1.0, 2.0, 0.9], ar1_correlation(4, 0.6).unwrap())
                .unwrap();
        let spec = spectral_decompose(&model.assemble()).unwrap();
        let x = ones_design(4);
        let y = Observation::from_slice(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        let t = transform_to_eigenbasis(&y, &x, &spec).unwrap();
        assert_relative_eq!(t.z.norm(), y.vector().norm(), max_relative = 1e-12);
        let recovered = spec.q() * &t.z;
        assert!((recovered - y.vector()).amax() < 1e-10);
    }

    #[test]
    fn zero_eigenvalue_rows_are_noise_free_equations() {
        // Rank-one Σ with σ = (1, 0.5): noise lives along v₁ only, so the
        // second transformed row is exact: Z₂ = v₂ᵗ X β.
        let sigmas = [1.0, 0.5];
        let sigma = rank_one_sigma(&sigmas);
        let spec = spectral_decompose(&sigma).unwrap();
        let x = ones_design(2);
        let beta = 3.0;
        let alpha = 0.7;
        let y =
            Observation::from_slice(&[beta + sigmas[0] * alpha, beta + sigmas[1] * alpha]).unwrap();
        let t = transform_to_eigenbasis(&y, &x, &spec).unwrap();
        assert_abs_diff_eq!(t.lambdas[1], 0.0, epsilon = 1e-12);
        let predicted = t.x_tilde[(1, 0)] * beta;
        assert_relative_eq!(t.z[1], predicted, max_relative = 1e-12);
    }

    #[test]
    fn reduced_design_rank_tracks_the_geometry() {
        let x = ones_design(2);

        // Dropping nothing: full design rank.
        let spec = spectral_decompose(&rank_one_sigma(&[1.0, 0.5])).unwrap();
        assert_eq!(reduced_design(&x, &spec, 0).unwrap().rank, 1);

        // Distinct noise levels: v₁ ∉ span(X), the reduced design keeps
        // rank m = 1 — exact determination.
        assert_eq!(reduced_design(&x, &spec, 1).unwrap().rank, 1);

        // Tied noise levels: v₁ ∝ (1,1) IS the design column; the reduced
        // design collapses to rank 0.
        let spec_tied = spectral_decompose(&rank_one_sigma(&[1.0, 1.0])).unwrap();
        let reduced = reduced_design(&x, &spec_tied, 1).unwrap();
        assert_eq!(reduced.rank, 0);
        assert!(reduced.matrix.amax() < 1e-12);

        assert!(matches!(
            reduced_design(&x, &spec, 2),
            Err(Error::InvalidGrid { .. })
        ));
    }

    #[test]
    fn reparametrize_scales_a_single_column_onto_v1() {
        let x = ones_design(2);
        let v1 = DVector::from_row_slice(&[1.0, 1.0]) / 2.0f64.sqrt();
        let w = reparametrize(&x, &v1).unwrap();
        assert_eq!(w.shape(), (1, 1));
        assert_relative_eq!(w[(0, 0)], 1.0 / 2.0f64.sqrt(), max_relative = 1e-12);
        let xw = x.matrix() * &w;
        assert!((xw.column(0) - &v1).amax() < 1e-12);
    }

    #[test]
    fn reparametrize_splits_noisy_and_orthogonal_directions() {
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0],
        ))
        .unwrap();
        let v1 = DVector::from_row_slice(&[1.0, 1.0, 1.0]) / 3.0f64.sqrt();
        let w = reparametrize(&x, &v1).unwrap();
        let xw = x.matrix() * &w;
        // First column of XW is v₁.
        assert!((xw.column(0) - &v1).amax() < 1e-10);
        // Remaining columns orthogonal to v₁.
        for j in 1..2 {
            assert_abs_diff_eq!(xw.column(j).dot(&v1), 0.0, epsilon = 1e-10);
        }
        // W is invertible and round-trips.
        let w_inv = w.clone().try_inverse().expect("W invertible");
        assert!((&w * &w_inv - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn reparametrize_refuses_vectors_outside_the_column_space() {
        let x = ones_design(2);
        let v1 = DVector::from_row_slice(&[1.0, 2.0]) / 5.0f64.sqrt();
        match reparametrize(&x, &v1) {
            Err(Error::NotInColumnSpace { residual, .. }) => {
                assert_relative_eq!(residual, 0.31622776601683794, max_relative = 1e-12);
            }
            other => panic!("expected membership rejection, got {other:?}"),
        }
    }

    #[test]
    fn limiting_direction_matches_eigenvector_of_assembled_limit() {
        let sigmas = [1.0, 0.5, 2.0];
        let e = SignVector::new(vec![1.0, -1.0, 1.0]).unwrap();
        let v1 = limiting_direction(&sigmas, &e).unwrap();
        assert_relative_eq!(v1.norm(), 1.0, max_relative = 1e-14);

        let sigma = CovarianceModel::new(sigmas.to_vec(), rank_one_limit(&e))
            .unwrap()
            .assemble();
        let spec = spectral_decompose(&sigma).unwrap();
        let from_eigen = spec.eigenvector(0);
        assert_abs_diff_eq!(v1.dot(&from_eigen).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn prediction_distinct_noise_levels_mean_exact_determination() {
        let x = ones_design(2);
        let e = SignVector::plus(2).unwrap();
        let report = limit_variance_prediction(&x, &[1.0, 0.5], &e).unwrap();
        assert!(!report.v1_in_column_space);
        assert_eq!(report.exact_dimension, 1);
        assert_eq!(report.noisy_dimension, 0);
        assert_eq!(report.predicted_total_variance, 0.0);
        assert_eq!(report.covariance_limit_rank, 1);
    }

    #[test]
    fn prediction_tied_noise_levels_keep_one_noisy_combination() {
        let x = ones_design(2);
        let e = SignVector::plus(2).unwrap();
        let report = limit_variance_prediction(&x, &[1.0, 1.0], &e).unwrap();
        assert!(report.v1_in_column_space);
        assert_eq!(report.exact_dimension, 0);
        assert_eq!(report.noisy_dimension, 1);
        // Total variance of the noisy (reparametrized) combination:
        // σ₁² + σ₂² = 2. (The plain mean μ̂ = γ₁/√2·… carries σ² = 1; the
        // factor is the v₁ normalization.)
        assert_relative_eq!(report.predicted_total_variance, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn prediction_exactness_for_three_distinct_levels() {
        let x = ones_design(3);
        let e = SignVector::plus(3).unwrap();
        let report = limit_variance_prediction(&x, &[1.0, 2.0, 3.0], &e).unwrap();
        assert!(!report.v1_in_column_space);
        assert_eq!(report.exact_dimension, 1);
        assert_eq!(report.predicted_total_variance, 0.0);

        // Confirmed dynamically: the variance of the fitted mean decays
        // toward zero along a full-correlation approach.
        let mut last = f64::INFINITY;
        for k in 2..=8 {
            let rho = 1.0 - 10f64.powi(-k);
            let model = CovarianceModel::new(vec![1.0, 2.0, 3.0], ar1_correlation(3, rho).unwrap())
                .unwrap();
            let fit = blue_fit(
                &Observation::from_slice(&[1.0, 1.0, 1.0]).unwrap(),
                &x,
                &model.assemble(),
            )
            .unwrap();
            let v = fit.covariance[(0, 0)];
            assert!(v < last, "variance should decay: {v} !< {last} at k={k}");
            last = v;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn prediction_is_scale_consistent() {
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0],
        ))
        .unwrap();
        let e = SignVector::plus(4).unwrap();
        let sigmas = [0.5, 1.0, 0.7, 1.3];
        let base = limit_variance_prediction(&x, &sigmas, &e).unwrap();
        let scaled_sigmas: Vec<f64> = sigmas.iter().map(|s| 3.0 * s).collect();
        let scaled = limit_variance_prediction(&x, &scaled_sigmas, &e).unwrap();
        assert_eq!(base.exact_dimension, scaled.exact_dimension);
        assert_eq!(base.v1_in_column_space, scaled.v1_in_column_space);
        assert_relative_eq!(
            scaled.predicted_total_variance,
            9.0 * base.predicted_total_variance,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            base.membership_residual,
            scaled.membership_residual,
            max_relative = 1e-10,
            epsilon = 1e-14
        );
    }

    #[test]
    fn prediction_rejects_underdetermined_and_deficient_problems() {
        let square = DesignMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let e = SignVector::plus(2).unwrap();
        assert!(matches!(
            limit_variance_prediction(&square, &[1.0, 2.0], &e),
            Err(Error::UnderdeterminedLimit { .. })
        ));

        let deficient = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0],
        ))
        .unwrap();
        let e3 = SignVector::plus(3).unwrap();
        assert!(matches!(
            limit_variance_prediction(&deficient, &[1.0, 1.0, 1.0], &e3),
            Err(Error::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn block_degenerate_covariance_splits_exact_and_noisy_dimensions() {
        // n = 5, m = 3; Σ = blockdiag(full-rank 2×2, rank-one 3×3) has rank
        // r′ = 3, so n - r′ = 2 noise-free equations: exactly 2 of the 3
        // parameter combinations become exact.
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.0, 0.0, //
                1.0, 1.0, 1.0, //
                1.0, 2.0, 4.0, //
                1.0, 3.0, 9.0, //
                1.0, 4.0, 16.0,
            ],
        ))
        .unwrap();
        let blocks = [
            ar1_correlation(2, 0.3).unwrap(),
            rank_one_limit(&SignVector::plus(3).unwrap()),
        ];
        let r = block_correlation(&blocks).unwrap();
        let model = CovarianceModel::new(vec![1.0; 5], r).unwrap();
        let sigma = model.assemble();

        let report = limit_variance_prediction_from_covariance(&x, &sigma).unwrap();
        assert_eq!(report.covariance_limit_rank, 3);
        assert_eq!(report.exact_dimension, 2);
        assert_eq!(report.noisy_dimension, 1);
        assert_relative_eq!(report.predicted_total_variance, 5.0, max_relative = 1e-12);
        assert!(report.exact_dimension <= 5 - report.covariance_limit_rank);
    }

    #[test]
    fn limit_estimate_recovers_parameters_exactly() {
        // Two measurements, distinct noise levels, exactly rank-one noise:
        // the noise-free equation recovers μ for any noise draw.
        let sigmas = [1.0, 0.5];
        let x = ones_design(2);
        let spec = spectral_decompose(&rank_one_sigma(&sigmas)).unwrap();
        let mu = 3.0;
        for &alpha in &[0.7, -1.9, 0.0] {
            let y =
                Observation::from_slice(&[mu + sigmas[0] * alpha, mu + sigmas[1] * alpha]).unwrap();
            let beta = limit_estimate(&y, &x, &spec).unwrap();
            assert_relative_eq!(beta[0], mu, max_relative = 1e-12);
            let closed =
                two_point_full_correlation_estimate(y.vector()[0], y.vector()[1], 1.0, 0.5)
                    .unwrap();
            assert_relative_eq!(beta[0], closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn limit_estimate_handles_multiparameter_designs() {
        // Three measurements, m = 2, rank-one Σ with v₁ outside the column
        // space: both parameters recovered exactly from the two noise-free
        // equations.
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0],
        ))
        .unwrap();
        let sigmas = [1.0, 2.0, 2.0];
        let spec = spectral_decompose(&rank_one_sigma(&sigmas)).unwrap();
        let beta_true = DVector::from_row_slice(&[0.4, -1.1]);
        for &alpha in &[1.3, -0.2] {
            let clean = x.matrix() * &beta_true;
            let y = Observation::from_slice(&[
                clean[0] + sigmas[0] * alpha,
                clean[1] + sigmas[1] * alpha,
                clean[2] + sigmas[2] * alpha,
            ])
            .unwrap();
            let beta = limit_estimate(&y, &x, &spec).unwrap();
            assert!((beta - &beta_true).amax() < 1e-10);
        }
    }

    #[test]
    fn limit_estimate_reports_underdetermined_systems() {
        // Tied noise levels: the single noise-free equation annihilates the
        // design (v₂ ⟂ column), leaving zero usable equations.
        let x = ones_design(2);
        let spec = spectral_decompose(&rank_one_sigma(&[1.0, 1.0])).unwrap();
        let y = Observation::from_slice(&[1.0, 2.0]).unwrap();
        match limit_estimate(&y, &x, &spec) {
            Err(Error::UnderdeterminedLimit { zero_rank, params }) => {
                assert_eq!((zero_rank, params), (0, 1));
            }
            other => panic!("expected underdetermined error, got {other:?}"),
        }

        // Full-rank covariance: no noise-free equations at all.
        let spec_full = spectral_decompose(&DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            limit_estimate(&y, &x, &spec_full),
            Err(Error::UnderdeterminedLimit { .. })
        ));
    }

    #[test]
    fn fitting_in_the_eigenbasis_reproduces_the_direct_fit() {
        // Rotating (y, X) by Qᵗ and weighting rows by 1/√λ turns GLS into
        // ordinary least squares; the result must match blue_fit.
        let model =
            CovarianceModel::new(vec![1.0, 0.5, 0.8, 1.2], ar1_correlation(4, 0.85).unwrap())
                .unwrap();
        let sigma = model.assemble();
        let x = DesignMatrix::new(DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0],
        ))
        .unwrap();
        let y = Observation::from_slice(&[0.1, 1.2, 1.9, 3.2]).unwrap();

        let spec = spectral_decompose(&sigma).unwrap();
        let t = transform_to_eigenbasis(&y, &x, &spec).unwrap();
        let mut a = t.x_tilde.clone();
        let mut b = t.z.clone();
        for i in 0..4 {
            let s = 1.0 / t.lambdas[i].sqrt();
            a.row_mut(i).scale_mut(s);
            b[i] *= s;
        }
        let beta_ols = a.svd(true, true).solve(&b, 0.0).unwrap();

        let fit = blue_fit(&y, &x, &sigma).unwrap();
        assert!((beta_ols - &fit.beta_hat).amax() < 1e-8 * fit.beta_hat.amax());
    }
}
