//! What happens to the best linear fit as noise correlations approach one.
//!
//! The dichotomy: send every pair correlation to 1 and the estimator
//! covariance either collapses to zero (typical designs — the parameters
//! become exactly determined) or part of it survives (designs whose column
//! space contains the scaled-noise direction v1). This example sweeps an
//! AR(1) correlation toward the limit for both kinds of design and prints
//! the analytic prediction alongside.
//!
//! Run with `cargo run --example full_correlation_limit`.

use correg::correlation::{ar1_correlation, CovarianceModel, SignVector};
use correg::estimator::{estimator_covariance, DesignMatrix};
use correg::subspace::{limit_variance_prediction, limiting_direction};
use nalgebra::DMatrix;

fn trace(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn main() -> Result<(), correg::Error> {
    let sigmas = vec![1.0, 0.5, 0.8];
    let signs = SignVector::plus(3)?;

    // A generic design: v1 is NOT in its column space.
    let generic = DesignMatrix::new(DMatrix::from_column_slice(
        3,
        2,
        &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0],
    ))?;

    // A tuned design: first column set to the scaled-noise direction v1,
    // so one noisy combination survives the limit.
    let v1 = limiting_direction(&sigmas, &signs)?;
    let tuned = DesignMatrix::new(DMatrix::from_columns(&[
        v1.column(0).into_owned(),
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0])
            .column(0)
            .into_owned(),
    ]))?;

    for (label, x) in [("generic design", &generic), ("tuned design", &tuned)] {
        println!("{label}: trace of the estimator covariance as rho -> 1");
        println!("{:>12}  {:>14}", "1 - rho", "trace(V)");
        for k in 1..=6 {
            let rho = 1.0 - 10f64.powi(-k);
            let model = CovarianceModel::new(sigmas.clone(), ar1_correlation(3, rho)?)?;
            let v = estimator_covariance(x, &model.assemble())?;
            println!("{:>12.0e}  {:>14.6e}", 1.0 - rho, trace(&v));
        }

        let report = limit_variance_prediction(x, &sigmas, &signs)?;
        println!(
            "limit prediction: v1 in column space = {}, \
             exactly determined directions = {}, noisy directions = {}, \
             predicted total variance = {}\n",
            report.v1_in_column_space,
            report.exact_dimension,
            report.noisy_dimension,
            report.predicted_total_variance
        );
    }

    println!(
        "the generic design's variance dies like 1 - rho; the tuned design \
         keeps a floor equal to the total noise power along v1"
    );
    Ok(())
}
