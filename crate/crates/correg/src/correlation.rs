//! Correlation and covariance model construction.
//!
//! The central objects are [`CorrelationMatrix`] (symmetric, unit diagonal,
//! positive semidefinite) and [`CovarianceModel`] (per-measurement noise
//! levels plus a correlation matrix, assembling `Σ = S R S`). Constructors
//! cover the lattice autoregressive family, the exponential family over
//! arbitrary locations, the rank-one fully correlated limit `R = e eᵗ`, and
//! block-diagonal composition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::format;
use crate::tol;
use crate::{Error, Result};

/// A validated correlation matrix: symmetric as stored, unit diagonal,
/// entries in `[-1, 1]`, positive semidefinite up to a documented roundoff
/// floor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates arbitrary entries as a correlation matrix.
    ///
    /// Checks, in order: squareness, finiteness, unit diagonal, symmetry
    /// (within [`tol::SYMMETRY_TOL_REL`], then symmetrized exactly), entry
    /// range (within the same slack, then clamped to `[-1, 1]`), and
    /// positive semidefiniteness (eigenvalues above
    /// `-PSD_FLOOR_REL * lambda_max`).
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyLocations);
        }
        let n = rows;
        for j in 0..n {
            for i in 0..n {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFiniteValue {
                        context: "correlation entry",
                        index: i * n + j,
                    });
                }
            }
        }
        for i in 0..n {
            if (entries[(i, i)] - 1.0).abs() > tol::SYMMETRY_TOL_REL {
                return Err(Error::UnitDiagonal {
                    index: i,
                    value: entries[(i, i)],
                });
            }
        }
        let mut max_asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asymmetry = max_asymmetry.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if max_asymmetry > tol::SYMMETRY_TOL_REL {
            return Err(Error::NotSymmetric {
                max_asymmetry,
                tolerance: tol::SYMMETRY_TOL_REL,
            });
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            for j in (i + 1)..n {
                let v = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                if v.abs() > 1.0 + tol::SYMMETRY_TOL_REL {
                    return Err(Error::EntryOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                let v = v.clamp(-1.0, 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        // A unit-diagonal symmetric matrix has trace n, so lambda_max >= 1
        // and the relative floor is well defined.
        let eigenvalues = SymmetricEigen::new(m.clone()).eigenvalues;
        let lambda_max = eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let lambda_min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let floor = -tol::PSD_FLOOR_REL * lambda_max;
        if lambda_min < floor {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: lambda_min,
                floor,
            });
        }
        Ok(CorrelationMatrix { entries: m })
    }

    /// Constructor for matrices that satisfy the invariants by construction
    /// (parametric families, block composition). Skips the O(n³) eigenvalue
    /// check.
    fn from_valid_family(entries: DMatrix<f64>) -> Self {
        debug_assert!(entries.is_square());
        CorrelationMatrix { entries }
    }

    /// Number of measurements (matrix dimension).
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// The stored entries.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entry `ϱ_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Distance from full correlation: `max` over off-diagonal pairs of
    /// `1 - |ϱ_ij|`. Zero exactly when every pair is fully (anti)correlated.
    /// For a single measurement there are no pairs and the distance is 0 by
    /// convention (one measurement is vacuously fully correlated with
    /// itself).
    pub fn kappa(&self) -> f64 {
        let n = self.n();
        let mut k = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                k = k.max(1.0 - self.entries[(i, j)].abs());
            }
        }
        k
    }

    /// Recovers the sign pattern `e` of a strongly correlated matrix, with
    /// the convention `e[0] = +1` and `e[j] = sign(ϱ_0j)`.
    ///
    /// Every off-diagonal magnitude must exceed `sign_threshold` (otherwise
    /// the sign is reported indeterminate), and every pair must satisfy the
    /// product rule `sign(ϱ_ij) = e_i e_j` (otherwise the offending pair is
    /// reported inconsistent). Note that a valid correlation matrix with all
    /// `|ϱ_ij| > 1/2` cannot be sign-inconsistent — an inconsistent triple
    /// with magnitudes above 1/2 has a negative eigenvalue — so with the
    /// default threshold [`tol::DEFAULT_SIGN_THRESHOLD`] the inconsistency
    /// error is reachable only for thresholds the caller lowered.
    pub fn sign_vector(&self, sign_threshold: f64) -> Result<SignVector> {
        if !sign_threshold.is_finite() || !(0.0..1.0).contains(&sign_threshold) {
            return Err(Error::InvalidTolerance {
                value: sign_threshold,
            });
        }
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.entries[(i, j)];
                if v.abs() <= sign_threshold {
                    return Err(Error::SignIndeterminate {
                        row: i,
                        col: j,
                        value: v,
                        threshold: sign_threshold,
                    });
                }
            }
        }
        let mut e = vec![1.0f64; n];
        for (j, sign) in e.iter_mut().enumerate().skip(1) {
            *sign = self.entries[(0, j)].signum();
        }
        for i in 1..n {
            for j in (i + 1)..n {
                if self.entries[(i, j)].signum() != e[i] * e[j] {
                    return Err(Error::SignInconsistent { row: i, col: j });
                }
            }
        }
        SignVector::new(e)
    }

    /// Serializes as JSON (`{"n", "m", "entries"}` with row-major nested
    /// arrays and 17-significant-digit numbers).
    pub fn to_json(&self) -> String {
        format::matrix_to_json(&self.entries)
    }

    /// Parses and validates the JSON form produced by [`Self::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_entries(format::matrix_from_json(text)?)
    }

    /// Serializes as headerless CSV with 17-significant-digit numbers.
    pub fn to_csv(&self) -> String {
        format::matrix_to_csv(&self.entries)
    }

    /// Parses and validates the CSV form produced by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        Self::from_entries(format::matrix_from_csv(text)?)
    }
}

/// A vector of measurement signs, each entry exactly `+1` or `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector {
    entries: Vec<f64>,
}

impl SignVector {
    /// Validates that every entry is exactly `+1.0` or `-1.0`.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyLocations);
        }
        for (index, &value) in entries.iter().enumerate() {
            if value != 1.0 && value != -1.0 {
                return Err(Error::InvalidSign { index, value });
            }
        }
        Ok(SignVector { entries })
    }

    /// The all-plus sign vector of length `n`.
    pub fn plus(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    /// Alternating signs `(+1, -1, +1, ...)` of length `n`.
    pub fn alternating(n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sign `e_j`.
    pub fn get(&self, j: usize) -> f64 {
        self.entries[j]
    }
}

/// Lattice autoregressive correlation: `ϱ_ij = rho^|i-j|`.
///
/// Requires `|rho| < 1`; the fully correlated boundary is represented exactly
/// by [`rank_one_limit`] instead.
pub fn ar1_correlation(n: usize, rho: f64) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::EmptyLocations);
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d == 0 {
            1.0
        } else {
            rho.powi(d as i32)
        }
    });
    Ok(CorrelationMatrix::from_valid_family(entries))
}

/// Exponential correlation over arbitrary locations:
/// `ϱ_ij = exp(-|x_i - x_j| / delta)`.
///
/// For equidistant locations `x_i = i/n` this coincides with
/// [`ar1_correlation`] at `rho = exp(-1/(delta * n))`.
pub fn exponential_correlation(locations: &[f64], delta: f64) -> Result<CorrelationMatrix> {
    if locations.is_empty() {
        return Err(Error::EmptyLocations);
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidDelta { delta });
    }
    for (index, &x) in locations.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "location",
                index,
            });
        }
    }
    let n = locations.len();
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-(locations[i] - locations[j]).abs() / delta).exp()
        }
    });
    Ok(CorrelationMatrix::from_valid_family(entries))
}

/// The fully correlated (rank-one) limit `R = e eᵗ`: every entry is `± 1`
/// according to the sign pattern, and the matrix has a single nonzero
/// eigenvalue `n`.
pub fn rank_one_limit(signs: &SignVector) -> CorrelationMatrix {
    let n = signs.len();
    let entries = DMatrix::from_fn(n, n, |i, j| signs.get(i) * signs.get(j));
    CorrelationMatrix::from_valid_family(entries)
}

/// Block-diagonal composition of correlation matrices; cross-block
/// correlations are exactly zero.
pub fn block_correlation(blocks: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    if blocks.is_empty() {
        return Err(Error::EmptyBlocks);
    }
    let n: usize = blocks.iter().map(|b| b.n()).sum();
    let mut entries = DMatrix::zeros(n, n);
    let mut offset = 0;
    for block in blocks {
        let k = block.n();
        entries
            .view_mut((offset, offset), (k, k))
            .copy_from(block.matrix());
        offset += k;
    }
    Ok(CorrelationMatrix::from_valid_family(entries))
}

/// Per-measurement noise levels plus a correlation structure; assembles the
/// covariance `Σ = S R S` with `S = diag(σ_1, ..., σ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    sigmas: Vec<f64>,
    correlation: CorrelationMatrix,
}

impl CovarianceModel {
    pub fn new(sigmas: Vec<f64>, correlation: CorrelationMatrix) -> Result<Self> {
        if sigmas.len() != correlation.n() {
            return Err(Error::DimensionMismatch {
                context: "noise levels vs. correlation size",
                expected: correlation.n(),
                actual: sigmas.len(),
            });
        }
        for (index, &value) in sigmas.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveSigma { index, value });
            }
        }
        Ok(CovarianceModel {
            sigmas,
            correlation,
        })
    }

    /// Convenience constructor for independent noise at the given levels
    /// (identity correlation).
    pub fn independent(sigmas: Vec<f64>) -> Result<Self> {
        let n = sigmas.len();
        if n == 0 {
            return Err(Error::EmptyLocations);
        }
        let identity = CorrelationMatrix::from_valid_family(DMatrix::identity(n, n));
        Self::new(sigmas, identity)
    }

    pub fn n(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    /// The covariance matrix `Σ_ij = σ_i σ_j ϱ_ij`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            self.sigmas[i] * self.sigmas[j] * self.correlation.entry(i, j)
        })
    }
}
