//! Composing correlation structure from independent groups, and the rank
//! law of the full-correlation limit.
//!
//! Five measurements: a weakly correlated pair plus a fully correlated
//! triple. In the limit the covariance keeps rank r' = 3 (two noisy pair
//! directions + one shared triple direction), so n - r' = 2 linear
//! combinations of the data are exactly determined — and for a 3-parameter
//! design the estimator covariance inherits exactly those 2 zero
//! eigenvalues.
//!
//! Run with `cargo run --example block_covariance`.

use correg::correlation::{
    ar1_correlation, block_correlation, rank_one_limit, CovarianceModel, SignVector,
};
use correg::estimator::{estimator_covariance, DesignMatrix};
use correg::subspace::{limit_variance_prediction_from_covariance, spectral_decompose};
use nalgebra::DMatrix;

fn main() -> Result<(), correg::Error> {
    let sigmas = vec![1.0, 0.5, 0.8, 1.2, 0.9];

    // The ideal limit: pair block ar1(0.3), triple block fully correlated.
    let limit_corr = block_correlation(&[
        ar1_correlation(2, 0.3)?,
        rank_one_limit(&SignVector::plus(3)?),
    ])?;
    let limit_model = CovarianceModel::new(sigmas.clone(), limit_corr)?;
    let sigma_limit = limit_model.assemble();

    let spectral = spectral_decompose(&sigma_limit)?;
    println!("limit covariance eigenvalues:");
    for j in 0..spectral.n() {
        println!("  lambda_{j} = {:.6e}", spectral.lambda(j));
    }

    // A 3-parameter design on 5 measurements.
    let x = DesignMatrix::new(DMatrix::from_column_slice(
        5,
        3,
        &[
            1.0, 1.0, 1.0, 1.0, 1.0, // intercept
            0.0, 0.25, 0.5, 0.75, 1.0, // slope
            0.0, 0.0625, 0.25, 0.5625, 1.0, // curvature
        ],
    ))?;
    let report = limit_variance_prediction_from_covariance(&x, &sigma_limit)?;
    println!(
        "\nlimit analysis: covariance rank r' = {}, exactly determined \
         parameter directions = {}, still-noisy directions = {}",
        report.covariance_limit_rank, report.exact_dimension, report.noisy_dimension
    );

    // Approach the limit numerically: replace the triple's full
    // correlation by an AR(1) at 1 - 1e-10 and look at the estimator
    // covariance spectrum.
    let near_corr =
        block_correlation(&[ar1_correlation(2, 0.3)?, ar1_correlation(3, 1.0 - 1e-10)?])?;
    let near_model = CovarianceModel::new(sigmas, near_corr)?;
    let v = estimator_covariance(&x, &near_model.assemble())?;
    let v_spectral = spectral_decompose(&v)?;
    println!("\nestimator covariance eigenvalues near the limit:");
    let lambda_max = v_spectral.lambda(0);
    let mut tiny = 0;
    for j in 0..v_spectral.n() {
        let lj = v_spectral.lambda(j);
        let mark = if lj < 1e-8 * lambda_max {
            tiny += 1;
            "  <- effectively zero"
        } else {
            ""
        };
        println!("  {lj:.6e}{mark}");
    }
    println!(
        "\n{} of {} eigenvalues vanish — matching n - r' = {}",
        tiny,
        v_spectral.n(),
        5 - report.covariance_limit_rank
    );
    Ok(())
}
