//! Stochastic verification of the estimator's sampling properties.
//!
//! Draws correlated Gaussian disturbances with a prescribed covariance,
//! runs the best-linear-unbiased fit on each synthetic data set, and
//! compares the empirical scatter of the estimates against the analytic
//! covariance. Also houses the negative-weight demonstration: with strongly
//! correlated, unequal-precision measurement pairs the optimal estimate
//! routinely falls *outside* the range of the data it was computed from.
//!
//! Reproducibility contract: every trial's random stream is keyed by
//! `(seed, trial index)` — a counter-based scheme — so results are a pure
//! function of `(seed, trials, problem)` and cannot depend on how trials
//! are chunked across threads. Gaussians come from the inverse-CDF
//! transform with a double-precision rational approximation, making the
//! streams reproducible across platforms to the accuracy of that
//! approximation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::estimator::{
    estimator_covariance, estimator_weights, two_point_weights, DesignMatrix, Observation,
};
use crate::subspace::{limit_estimate, spectral_decompose, SpectralDecomposition};
use crate::tol;
use crate::{Error, Result};

/// Inverse of the standard normal cumulative distribution function.
///
/// Wichura's double-precision rational approximation (relative error below
/// ~1e-15 over the full open interval). Exactly antisymmetric about
/// `p = 1/2` and exactly zero at the median.
///
/// Returns an error for `p` outside the open interval `(0, 1)`.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::InvalidTolerance { value: p });
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r));
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        horner(&TAIL_NUM, r) / horner(&TAIL_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&FAR_TAIL_NUM, r) / horner(&FAR_TAIL_DEN, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

/// Evaluate `c[0] + c[1]·r + … + c[7]·r⁷`.
fn horner(coefficients: &[f64; 8], r: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const CENTRAL_NUM: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const TAIL_NUM: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const TAIL_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const FAR_TAIL_NUM: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const FAR_TAIL_DEN: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

/// Map raw generator output to the open interval `(0, 1)`:
/// `u = ((bits >> 12) + 0.5) · 2⁻⁵²`. Both endpoints of the lattice
/// (`2⁻⁵³` and `1 − 2⁻⁵³`) are exactly representable, so the result never
/// touches 0 or 1 and the inverse CDF stays finite.
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The stream for trial `t`: seed and trial index enter the cipher key
/// verbatim (injective by construction), padded with mixed bits so nearby
/// keys do not share structure.
fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut state = seed.wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    key[16..24].copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    key[24..32].copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // open_unit keeps p strictly inside (0, 1), so the unwrap cannot fire.
    inverse_normal_cdf(open_unit(rng.next_u64())).expect("open-interval uniform")
}

/// A factor `L` with `LLᵗ = Σ`, used to color standard normal draws.
///
/// Triangular factorization when Σ is positive definite; otherwise the
/// spectral square root with eigenvalues below
/// [`tol::SAMPLING_CLAMP_REL`]`·λ₁` clamped to zero — rank-deficient
/// covariances are exactly the interesting inputs here and must sample
/// correctly (all draws then lie in the non-degenerate eigenspace).
#[derive(Debug, Clone)]
pub struct NoiseFactor {
    l: DMatrix<f64>,
    rank: usize,
    used_spectral_root: bool,
}

impl NoiseFactor {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        if let Some(chol) = Cholesky::new(sigma.clone()) {
            return Ok(NoiseFactor {
                rank: sigma.nrows(),
                l: chol.l(),
                used_spectral_root: false,
            });
        }
        // Not positive definite: validate, clamp tiny negatives, reject
        // anything indefinite beyond tolerance, and take Q·√Λ.
        let spectral = spectral_decompose(sigma)?;
        let n = spectral.n();
        let lambda_max = spectral.lambda(0).max(0.0);
        let clamp = tol::SAMPLING_CLAMP_REL * lambda_max;
        let mut l = spectral.q().clone_owned();
        let mut rank = 0;
        for j in 0..n {
            let lj = spectral.lambda(j);
            let scale = if lj > clamp {
                rank += 1;
                lj.sqrt()
            } else {
                0.0
            };
            for i in 0..n {
                l[(i, j)] *= scale;
            }
        }
        Ok(NoiseFactor {
            l,
            rank,
            used_spectral_root: true,
        })
    }

    pub fn dimension(&self) -> usize {
        self.l.nrows()
    }

    /// Number of non-degenerate noise directions.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Whether the spectral square root (rank-deficient path) was taken.
    pub fn used_spectral_root(&self) -> bool {
        self.used_spectral_root
    }

    /// One disturbance draw `η = Lz`, `z ~ N(0, I)`.
    fn draw(&self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        let n = self.dimension();
        let z = DVector::from_iterator(n, (0..n).map(|_| standard_normal(rng)));
        &self.l * z
    }
}

/// `count` independent mean-zero Gaussian rows with covariance `sigma`
/// (one draw per row). Row `t` is a pure function of `(seed, t)`: the same
/// row appears at the same index whatever the total count.
pub fn sample_correlated_noise(
    sigma: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let factor = NoiseFactor::new(sigma)?;
    let n = factor.dimension();
    let mut out = DMatrix::zeros(count, n);
    for t in 0..count {
        let mut rng = trial_rng(seed, t as u64);
        let eta = factor.draw(&mut rng);
        for j in 0..n {
            out[(t, j)] = eta[j];
        }
    }
    Ok(out)
}

/// Configuration of a Monte Carlo covariance check.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    /// True coefficients used to synthesize the data.
    pub beta_true: DVector<f64>,
    /// Worker partition hint; has no effect on results.
    pub parallel_chunks: usize,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64, beta_true: DVector<f64>) -> Self {
        McConfig {
            trials,
            seed,
            beta_true,
            parallel_chunks: 1,
        }
    }

    pub fn with_parallel_chunks(mut self, chunks: usize) -> Self {
        self.parallel_chunks = chunks.max(1);
        self
    }
}

/// Outcome of a Monte Carlo covariance check.
#[derive(Debug, Clone)]
pub struct McReport {
    pub trials: usize,
    pub seed: u64,
    /// Whether the degenerate-covariance path (noise-free-equation solve)
    /// was exercised instead of the standard fit.
    pub limit_mode: bool,
    pub empirical_mean: DVector<f64>,
    /// Sample covariance of the estimates over trials (unbiased, T−1).
    pub empirical_covariance: DMatrix<f64>,
    /// The covariance the theory promises for the estimator.
    pub analytic_covariance: DMatrix<f64>,
    /// Largest |empirical − analytic| covariance entry in units of that
    /// entry's Monte Carlo standard error.
    pub max_standardized_deviation: f64,
    /// Largest |mean − true| coefficient in units of its standard error.
    pub max_mean_deviation: f64,
    /// For single-coefficient ones-column designs (plain weighted mean):
    /// fraction of trials where the estimate fell outside
    /// `[min yᵢ, max yᵢ]`. `None` for other designs.
    pub outside_range_fraction: Option<f64>,
}

#[derive(Serialize)]
struct McReportWire {
    trials: usize,
    seed: u64,
    limit_mode: bool,
    empirical_mean: Vec<f64>,
    empirical_covariance: Vec<Vec<f64>>,
    analytic_covariance: Vec<Vec<f64>>,
    max_standardized_deviation: f64,
    max_mean_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    outside_range_fraction: Option<f64>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl McReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(McReportWire {
            trials: self.trials,
            seed: self.seed,
            limit_mode: self.limit_mode,
            empirical_mean: self.empirical_mean.iter().copied().collect(),
            empirical_covariance: matrix_rows(&self.empirical_covariance),
            analytic_covariance: matrix_rows(&self.analytic_covariance),
            max_standardized_deviation: self.max_standardized_deviation,
            max_mean_deviation: self.max_mean_deviation,
            outside_range_fraction: self.outside_range_fraction,
        })
        .expect("report serialization cannot fail")
    }
}

/// Standardize a deviation against a sampling standard error. Entries with
/// zero standard error (degenerate analytic covariance) count as zero when
/// the deviation itself is negligible and as infinite otherwise.
fn standardized(deviation: f64, se: f64) -> f64 {
    if se > 0.0 {
        deviation.abs() / se
    } else if deviation.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

const COVARIANCE_MODE_MIN_TRIALS: usize = 100;

/// Run `config.trials` synthetic experiments `y = Xβ + η`, fit each one,
/// and compare the scatter of the fitted coefficients with the analytic
/// estimator covariance.
///
/// When the noise covariance is degenerate past the solver's conditioning
/// floor, the check switches to limit mode: each trial is solved through
/// the noise-free equations (the degenerate directions determine β
/// exactly), and the analytic covariance is the zero matrix.
///
/// Results are bit-identical for a given `(seed, trials, problem)`
/// regardless of `parallel_chunks`.
pub fn empirical_estimator_covariance(
    x: &DesignMatrix,
    sigma: &DMatrix<f64>,
    config: &McConfig,
) -> Result<McReport> {
    if config.trials < COVARIANCE_MODE_MIN_TRIALS {
        return Err(Error::TooFewTrials {
            trials: config.trials,
            minimum: COVARIANCE_MODE_MIN_TRIALS,
        });
    }
    let n = x.n();
    let m = x.m();
    if config.beta_true.len() != m {
        return Err(Error::DimensionMismatch {
            context: "true coefficient vector",
            expected: m,
            actual: config.beta_true.len(),
        });
    }
    if sigma.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "noise covariance",
            expected: n,
            actual: sigma.nrows(),
        });
    }

    let spectral = spectral_decompose(sigma)?;
    let limit_mode = spectral.condition_ratio() < tol::SOLVE_CONDITION_FLOOR;
    let (weights, analytic) = if limit_mode {
        (None, DMatrix::zeros(m, m))
    } else {
        (
            Some(estimator_weights(x, sigma)?),
            estimator_covariance(x, sigma)?,
        )
    };
    // Fail fast if the limit solve cannot determine the coefficients at
    // all, rather than erroring identically in every trial.
    if limit_mode {
        let probe = Observation::new(DVector::zeros(n))?;
        limit_estimate(&probe, x, &spectral)?;
    }

    let factor = NoiseFactor::new(sigma)?;
    let mean_signal = x.matrix() * &config.beta_true;
    let track_range = m == 1 && x.matrix().column(0).iter().all(|&v| v == 1.0);

    let estimates = run_trials(
        config,
        &factor,
        &mean_signal,
        x,
        &spectral,
        weights.as_ref(),
        track_range,
    )?;

    // Sequential two-pass reduction in trial order: deterministic
    // accumulation whatever the thread count used above. The mean uses
    // compensated (Neumaier) summation because the zero-variance limit path
    // certifies exact recovery through a hard |mean − β| window that naive
    // accumulation noise (∝ trials · ulp) would overrun at large trial
    // counts.
    let t = config.trials;
    let mut sum = vec![0.0f64; m];
    let mut compensation = vec![0.0f64; m];
    for (beta, _) in &estimates {
        for j in 0..m {
            let value = beta[j];
            let new_sum = sum[j] + value;
            compensation[j] += if sum[j].abs() >= value.abs() {
                (sum[j] - new_sum) + value
            } else {
                (value - new_sum) + sum[j]
            };
            sum[j] = new_sum;
        }
    }
    let mean = DVector::from_iterator(
        m,
        sum.iter()
            .zip(&compensation)
            .map(|(s, c)| (s + c) / t as f64),
    );
    let mut cov = DMatrix::zeros(m, m);
    for (beta, _) in &estimates {
        let d = beta - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    for i in 0..m {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov /= (t - 1) as f64;

    let mut max_std_dev: f64 = 0.0;
    for i in 0..m {
        for j in 0..=i {
            let vii = analytic[(i, i)];
            let vjj = analytic[(j, j)];
            let vij = analytic[(i, j)];
            let se = ((vii * vjj + vij * vij) / (t as f64 - 1.0)).sqrt();
            max_std_dev = max_std_dev.max(standardized(cov[(i, j)] - vij, se));
        }
    }
    let mut max_mean_dev: f64 = 0.0;
    for j in 0..m {
        let se = (analytic[(j, j)] / t as f64).sqrt();
        max_mean_dev = max_mean_dev.max(standardized(mean[j] - config.beta_true[j], se));
    }

    let outside_range_fraction = if track_range {
        let outside = estimates.iter().filter(|(_, o)| *o == Some(true)).count();
        Some(outside as f64 / t as f64)
    } else {
        None
    };

    Ok(McReport {
        trials: t,
        seed: config.seed,
        limit_mode,
        empirical_mean: mean,
        empirical_covariance: cov,
        analytic_covariance: analytic,
        max_standardized_deviation: max_std_dev,
        max_mean_deviation: max_mean_dev,
        outside_range_fraction,
    })
}

type TrialOutcome = (DVector<f64>, Option<bool>);

#[allow(clippy::too_many_arguments)]
fn run_trials(
    config: &McConfig,
    factor: &NoiseFactor,
    mean_signal: &DVector<f64>,
    x: &DesignMatrix,
    spectral: &SpectralDecomposition,
    weights: Option<&DMatrix<f64>>,
    track_range: bool,
) -> Result<Vec<TrialOutcome>> {
    let one_trial = |t: usize| -> Result<TrialOutcome> {
        let mut rng = trial_rng(config.seed, t as u64);
        let y = mean_signal + factor.draw(&mut rng);
        let beta = match weights {
            Some(w) => w * &y,
            None => limit_estimate(&Observation::new(y.clone())?, x, spectral)?,
        };
        let outside = if track_range {
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Some(beta[0] < lo || beta[0] > hi)
        } else {
            None
        };
        Ok((beta, outside))
    };

    if config.parallel_chunks <= 1 {
        (0..config.trials).map(one_trial).collect()
    } else {
        // Indexed parallel map: the collected order is by trial index, so
        // the result is identical to the sequential branch.
        let chunk = config.trials.div_ceil(config.parallel_chunks).max(1);
        (0..config.trials)
            .into_par_iter()
            .with_min_len(chunk)
            .map(one_trial)
            .collect()
    }
}

/// One act of the negative-weight demonstration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeelleRecord {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub mu: f64,
    /// Optimal weights; `w1 < 0` in this regime.
    pub w1: f64,
    pub w2: f64,
    /// The sampled measurement pair.
    pub y1: f64,
    pub y2: f64,
    /// `w₁y₁ + w₂y₂`.
    pub estimate: f64,
    /// Whether the estimate escaped `[min(y₁, y₂), max(y₁, y₂)]`.
    pub outside_range: bool,
}

impl PeelleRecord {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("record serialization cannot fail")
    }
}

/// Sample one correlated measurement pair of a common mean `mu` with noise
/// levels `sigma1 > sigma2` and correlation `rho`, and fit the optimal
/// weighted mean.
///
/// Requires `rho > sigma2/sigma1` — the regime where the noisier
/// measurement earns a *negative* weight and the estimate can leave the
/// data range entirely (the counterintuitive fit known from correlated
/// nuclear-data evaluations).
pub fn peelle_demo(sigma1: f64, sigma2: f64, rho: f64, mu: f64, seed: u64) -> Result<PeelleRecord> {
    if !sigma1.is_finite() || sigma1 <= 0.0 {
        return Err(Error::NonPositiveSigma {
            index: 0,
            value: sigma1,
        });
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::NonPositiveSigma {
            index: 1,
            value: sigma2,
        });
    }
    if sigma2 >= sigma1 {
        return Err(Error::ProblemValidation {
            field: "sigma2".into(),
            message: format!(
                "the demonstration orders the pair as sigma1 > sigma2; \
                 got sigma1 = {sigma1}, sigma2 = {sigma2}"
            ),
        });
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationOutOfRange { rho });
    }
    let threshold = sigma2 / sigma1;
    if rho <= threshold {
        return Err(Error::NotInNegativeWeightRegime { rho, threshold });
    }
    if rho >= 1.0 {
        return Err(Error::CorrelationOutOfRange { rho });
    }

    let (w1, w2) = two_point_weights(sigma1, sigma2, rho)?;
    let sigma = DMatrix::from_row_slice(
        2,
        2,
        &[
            sigma1 * sigma1,
            rho * sigma1 * sigma2,
            rho * sigma1 * sigma2,
            sigma2 * sigma2,
        ],
    );
    let factor = NoiseFactor::new(&sigma)?;
    let mut rng = trial_rng(seed, 0);
    let eta = factor.draw(&mut rng);
    let y1 = mu + eta[0];
    let y2 = mu + eta[1];
    let estimate = w1 * y1 + w2 * y2;
    let outside_range = estimate < y1.min(y2) || estimate > y1.max(y2);
    Ok(PeelleRecord {
        sigma1,
        sigma2,
        rho,
        mu,
        w1,
        w2,
        y1,
        y2,
        estimate,
        outside_range,
    })
}
