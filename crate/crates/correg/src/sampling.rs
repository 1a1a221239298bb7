//! Variance of the mean of densely sampled, exponentially correlated
//! measurements.
//!
//! The setting: `n + 1` equidistant measurements at `i/n` on `[0, 1]`, each
//! with signal-to-noise `τ(i/n)` (so noise level `σᵢ = 1/τᵢ`), and noise
//! correlations `exp(-|x_i - x_j|/δ)` — on this lattice an autoregressive
//! chain with `ϱ = exp(-1/(δn))`. The chain's tridiagonal precision matrix
//! collapses the inverse variance of the best linear mean estimate to a
//! three-term closed form:
//!
//! `𝒱⁻¹(n, δ) = [(1-ϱ)² Στᵢ² + ϱ Σ(τᵢ₊₁-τᵢ)² + ϱ(1-ϱ)(τ(0)² + τ(1)²)] / (1-ϱ²)`
//!
//! ([`inverse_variance_exact`]). For `δn ≫ 1` this is governed by two
//! kernels `f, g → ½` ([`asymptotic_kernels`]), giving the large-`n` form
//! `δ/2·∫τ′² + 1/(2δ)·∫τ² + ½(τ(0)²+τ(1)²)` ([`inverse_variance_asymptotic`])
//! and the `n → ∞` limit ([`limiting_variance`]). The punchline for
//! measurement-campaign design: once `n ≳ 1/δ`, adding measurements packs
//! them inside one correlation length and the variance stops improving —
//! it plateaus at the limit, which is *worst* at `δ² = ∫τ²/∫τ′²`
//! ([`delta_at_max_variance`]).

use crate::format::{Axis, CurveTable, Series};
use crate::tol;
use crate::{Error, Result};

/// A signal-to-noise profile `τ(s) > 0` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrProfile {
    /// `τ(s) = τ₀ (1 + α s)`.
    Linear { tau0: f64, alpha: f64 },
    /// Values at equidistant grid points spanning `[0, 1]`, linearly
    /// interpolated in between.
    Tabulated { values: Vec<f64> },
}

impl SnrProfile {
    /// Linear profile `τ(s) = τ₀(1 + αs)`; must stay positive on `[0, 1]`.
    pub fn linear(tau0: f64, alpha: f64) -> Result<Self> {
        if !tau0.is_finite() || tau0 <= 0.0 {
            return Err(Error::NonPositiveProfile {
                location: 0.0,
                value: tau0,
            });
        }
        if !alpha.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "profile slope",
                index: 0,
            });
        }
        let at_one = tau0 * (1.0 + alpha);
        if at_one <= 0.0 {
            return Err(Error::NonPositiveProfile {
                location: 1.0,
                value: at_one,
            });
        }
        Ok(SnrProfile::Linear { tau0, alpha })
    }

    /// Tabulated profile from at least two positive values at equidistant
    /// points covering `[0, 1]`.
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::EmptyProfile);
        }
        let last = (values.len() - 1) as f64;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositiveProfile {
                    location: i as f64 / last,
                    value: v,
                });
            }
        }
        Ok(SnrProfile::Tabulated { values })
    }

    /// `τ(s)` for `s ∈ [0, 1]` (clamped outside).
    pub fn value(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            SnrProfile::Linear { tau0, alpha } => tau0 * (1.0 + alpha * s),
            SnrProfile::Tabulated { values } => {
                let segments = (values.len() - 1) as f64;
                let t = s * segments;
                let i = (t.floor() as usize).min(values.len() - 2);
                let frac = t - i as f64;
                values[i] + frac * (values[i + 1] - values[i])
            }
        }
    }

    /// The same shape rescaled so `τ(1) = 1` (the figure-caption
    /// convention).
    pub fn normalized(&self) -> Self {
        let scale = self.value(1.0);
        match self {
            SnrProfile::Linear { tau0, alpha } => SnrProfile::Linear {
                tau0: tau0 / scale,
                alpha: *alpha,
            },
            SnrProfile::Tabulated { values } => SnrProfile::Tabulated {
                values: values.iter().map(|v| v / scale).collect(),
            },
        }
    }

    /// `∫₀¹ τ(s)² ds` — analytic for the linear form
    /// (`τ₀²(1 + α + α²/3)`), composite trapezoid at
    /// [`tol::TABULATED_QUADRATURE_PANELS`] panels for tabulated profiles.
    pub fn squared_integral(&self) -> f64 {
        match self {
            SnrProfile::Linear { tau0, alpha } => tau0 * tau0 * (1.0 + alpha + alpha * alpha / 3.0),
            SnrProfile::Tabulated { .. } => {
                let panels = tol::TABULATED_QUADRATURE_PANELS;
                let h = 1.0 / panels as f64;
                let mut total = 0.5 * (self.value(0.0).powi(2) + self.value(1.0).powi(2));
                for k in 1..panels {
                    total += self.value(k as f64 * h).powi(2);
                }
                total * h
            }
        }
    }

    /// `∫₀¹ τ′(s)² ds` — `τ₀²α²` for the linear form; exact for the
    /// piecewise-linear interpolant of a tabulated profile.
    pub fn derivative_squared_integral(&self) -> f64 {
        match self {
            SnrProfile::Linear { tau0, alpha } => tau0 * tau0 * alpha * alpha,
            SnrProfile::Tabulated { values } => {
                let h = 1.0 / (values.len() - 1) as f64;
                values
                    .windows(2)
                    .map(|w| {
                        let slope = (w[1] - w[0]) / h;
                        slope * slope * h
                    })
                    .sum()
            }
        }
    }

    /// `(τ(0)², τ(1)²)`.
    pub fn boundary_squares(&self) -> (f64, f64) {
        (self.value(0.0).powi(2), self.value(1.0).powi(2))
    }

    /// Whether the profile is constant (zero derivative energy).
    pub fn is_constant(&self) -> bool {
        self.derivative_squared_integral() == 0.0
    }
}

/// An equidistant measurement campaign: `n` intervals (`n + 1` measurements
/// at `i/n`, `i = 0..n`), correlation length `δ > 0`, and a signal-to-noise
/// profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    n: usize,
    delta: f64,
    profile: SnrProfile,
}

impl SamplingPlan {
    pub fn new(n: usize, delta: f64, profile: SnrProfile) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid {
                message: "a sampling plan needs at least one interval".into(),
            });
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidDelta { delta });
        }
        Ok(SamplingPlan { n, delta, profile })
    }

    /// Interval count (there are `n + 1` measurements).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn profile(&self) -> &SnrProfile {
        &self.profile
    }

    /// Lattice correlation between neighbors: `ϱ = exp(-1/(δn))`.
    pub fn rho(&self) -> f64 {
        (-1.0 / (self.delta * self.n as f64)).exp()
    }

    /// Measurement locations `i/n`, `i = 0..n`.
    pub fn locations(&self) -> Vec<f64> {
        (0..=self.n).map(|i| i as f64 / self.n as f64).collect()
    }

    /// `τ(i/n)` at every measurement location.
    pub fn tau_values(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|i| self.profile.value(i as f64 / self.n as f64))
            .collect()
    }
}

/// Inverse variance `Σᵢ τᵢ²` of the best mean estimate from uncorrelated
/// measurements — the `δ = 0` (equivalently `ϱ = 0`) branch.
pub fn inverse_variance_uncorrelated(profile: &SnrProfile, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidGrid {
            message: "a sampling plan needs at least one interval".into(),
        });
    }
    Ok((0..=n)
        .map(|i| profile.value(i as f64 / n as f64).powi(2))
        .sum())
}

/// Exact inverse variance of the best linear mean estimate under the
/// lattice-correlated noise model:
///
/// `𝒱⁻¹ = [(1-ϱ)² Στᵢ² + ϱ Σ(τᵢ₊₁-τᵢ)² + ϱ(1-ϱ)(τ(0)²+τ(1)²)] / (1-ϱ²)`.
///
/// Identical to the quadratic form `Σᵢⱼ (R⁻¹)ᵢⱼ τᵢτⱼ` with the tridiagonal
/// chain precision. When `1/(δn)` drops below
/// [`tol::RHO_SATURATION_GUARD`], `1 - ϱ` underflows and the value is taken
/// from the analytic limit ([`limiting_variance`]), which is the correct
/// answer in that regime.
pub fn inverse_variance_exact(plan: &SamplingPlan) -> Result<f64> {
    let n = plan.n() as f64;
    let x = 1.0 / (plan.delta() * n);
    if x < tol::RHO_SATURATION_GUARD {
        return Ok(1.0 / limiting_variance(plan.profile(), plan.delta())?);
    }
    // 1 - ϱ via expm1: exact even when ϱ is within a few ulps of 1.
    let one_minus_rho = -(-x).exp_m1();
    let rho = 1.0 - one_minus_rho;
    let taus = plan.tau_values();
    let sum_sq: f64 = taus.iter().map(|t| t * t).sum();
    let sum_diff_sq: f64 = taus.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let boundary = taus[0] * taus[0] + taus[taus.len() - 1] * taus[taus.len() - 1];
    let numerator =
        one_minus_rho * one_minus_rho * sum_sq + rho * sum_diff_sq + rho * one_minus_rho * boundary;
    Ok(numerator / (one_minus_rho * (1.0 + rho)))
}

/// The large-`δn` approximation of the inverse variance, with an indication
/// of what was neglected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticInverseVariance {
    /// `δ/2 ∫τ′² + 1/(2δ) ∫τ² + ½(τ(0)² + τ(1)²)`.
    pub leading: f64,
    /// Magnitude estimate of the neglected `O((δn)⁻²)` terms (kernel
    /// curvature plus discretization); indicative bookkeeping, not a bound
    /// with a proven constant.
    pub neglected_order_bound: f64,
}

/// Asymptotic inverse variance for `δn > 1`:
/// `δ/2·∫τ′² + 1/(2δ)·∫τ² + ½(τ(0)² + τ(1)²)`, correct up to relative
/// `O((δn)⁻²)`.
pub fn inverse_variance_asymptotic(
    profile: &SnrProfile,
    delta: f64,
    n: usize,
) -> Result<AsymptoticInverseVariance> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidDelta { delta });
    }
    if n == 0 {
        return Err(Error::InvalidGrid {
            message: "a sampling plan needs at least one interval".into(),
        });
    }
    let dn = delta * n as f64;
    if dn <= 1.0 {
        return Err(Error::InvalidGrid {
            message: format!(
                "asymptotic form holds for delta*n > 1; got delta*n = {dn} \
                 (use inverse_variance_exact instead)"
            ),
        });
    }
    let sq = profile.squared_integral();
    let dsq = profile.derivative_squared_integral();
    let (b0, b1) = profile.boundary_squares();
    let leading = 0.5 * delta * dsq + 0.5 * sq / delta + 0.5 * (b0 + b1);

    // Kernel curvature away from ½ plus a lattice-discretization allowance.
    let x = 1.0 / dn;
    let (f, g) = asymptotic_kernels(x)?;
    let neglected = (f - 0.5).abs() * sq / delta
        + (g - 0.5).abs() * delta * dsq
        + (delta + 1.0 / delta) / (n as f64 * n as f64);
    Ok(AsymptoticInverseVariance {
        leading,
        neglected_order_bound: neglected,
    })
}

/// The `n → ∞` variance of the best mean estimate at correlation length
/// `δ`:
///
/// `𝒱 = 2δ / (∫τ² + δ(τ(0)² + τ(1)²) + δ² ∫τ′²)`.
///
/// Adding measurements beyond `n ≈ 1/δ` cannot beat this floor; it vanishes
/// as `δ → ∞` for any non-constant profile and approaches `τ⁻²` for a
/// constant one.
pub fn limiting_variance(profile: &SnrProfile, delta: f64) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidDelta { delta });
    }
    let sq = profile.squared_integral();
    let dsq = profile.derivative_squared_integral();
    let (b0, b1) = profile.boundary_squares();
    Ok(2.0 * delta / (sq + delta * (b0 + b1) + delta * delta * dsq))
}

/// The correlation length at which [`limiting_variance`] is largest:
/// `δ² = ∫τ² / ∫τ′²`. A constant profile has no interior maximum (the
/// limiting variance then grows monotonically with `δ`).
pub fn delta_at_max_variance(profile: &SnrProfile) -> Result<f64> {
    let dsq = profile.derivative_squared_integral();
    if dsq <= 0.0 {
        return Err(Error::NoInteriorMaximum);
    }
    Ok((profile.squared_integral() / dsq).sqrt())
}

/// The two kernels governing the approach to the asymptotic regime:
///
/// `f(x) = (1 - e⁻ˣ)/(x(1 + e⁻ˣ)) = tanh(x/2)/x`,
/// `g(x) = x e⁻ˣ/(1 - e⁻²ˣ) = x/(2 sinh x)`.
///
/// Both tend to `½` as `x → 0` with `O(x²)` error. Below
/// [`tol::KERNEL_SERIES_CUTOFF`] they are evaluated by series (the direct
/// formulas lose digits to cancellation there).
pub fn asymptotic_kernels(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::NonPositiveKernelArgument { x });
    }
    if x < tol::KERNEL_SERIES_CUTOFF {
        let x2 = x * x;
        let f = 0.5 - x2 / 24.0 + x2 * x2 / 240.0 - 17.0 * x2 * x2 * x2 / 40320.0;
        let g = 0.5 * (1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0 - 31.0 * x2 * x2 * x2 / 15120.0);
        Ok((f, g))
    } else {
        let f = (0.5 * x).tanh() / x;
        let g = x / (2.0 * x.sinh());
        Ok((f, g))
    }
}

fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidGrid {
            message: "empty correlation-length grid".into(),
        });
    }
    for &d in deltas {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::InvalidDelta { delta: d });
        }
    }
    Ok(())
}

/// Variance of the mean estimate as a function of correlation length: one
/// series per interval count `n` (exact evaluation) plus, optionally, the
/// `n → ∞` column labelled `limit`.
pub fn variance_curve_vs_delta(
    profile: &SnrProfile,
    deltas: &[f64],
    n_values: &[usize],
    include_limit: bool,
) -> Result<CurveTable> {
    validate_deltas(deltas)?;
    let mut series = Vec::with_capacity(n_values.len() + 1);
    for &n in n_values {
        let mut values = Vec::with_capacity(deltas.len());
        for &delta in deltas {
            let plan = SamplingPlan::new(n, delta, profile.clone())?;
            values.push(1.0 / inverse_variance_exact(&plan)?);
        }
        series.push(Series {
            name: format!("n={n}"),
            values,
        });
    }
    if include_limit {
        let mut values = Vec::with_capacity(deltas.len());
        for &delta in deltas {
            values.push(limiting_variance(profile, delta)?);
        }
        series.push(Series {
            name: "limit".into(),
            values,
        });
    }
    CurveTable::new("delta", Axis::Points(deltas.to_vec()), series)
}

/// Variance of the mean estimate as a function of interval count at one
/// correlation length. `delta = 0` selects the uncorrelated branch
/// (`𝒱 = 1/Στᵢ²`).
pub fn variance_curve_vs_n(
    profile: &SnrProfile,
    delta: f64,
    n_values: &[usize],
) -> Result<CurveTable> {
    let series = variance_series_vs_n(profile, delta, n_values)?;
    CurveTable::new("n", Axis::Counts(n_values.to_vec()), vec![series])
}

/// As [`variance_curve_vs_n`] with several correlation lengths side by
/// side, one series per `δ`.
pub fn variance_curves_vs_n(
    profile: &SnrProfile,
    deltas: &[f64],
    n_values: &[usize],
) -> Result<CurveTable> {
    if deltas.is_empty() {
        return Err(Error::InvalidGrid {
            message: "empty correlation-length list".into(),
        });
    }
    let mut series = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        series.push(variance_series_vs_n(profile, delta, n_values)?);
    }
    CurveTable::new("n", Axis::Counts(n_values.to_vec()), series)
}

fn variance_series_vs_n(profile: &SnrProfile, delta: f64, n_values: &[usize]) -> Result<Series> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidDelta { delta });
    }
    if n_values.is_empty() {
        return Err(Error::InvalidGrid {
            message: "empty interval-count grid".into(),
        });
    }
    let mut values = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let v = if delta == 0.0 {
            1.0 / inverse_variance_uncorrelated(profile, n)?
        } else {
            let plan = SamplingPlan::new(n, delta, profile.clone())?;
            1.0 / inverse_variance_exact(&plan)?
        };
        values.push(v);
    }
    Ok(Series {
        name: format!("delta={delta}"),
        values,
    })
}
