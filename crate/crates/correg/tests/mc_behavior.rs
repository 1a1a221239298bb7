//! Monte Carlo harness behavior: determinism under parallel chunking,
//! unbiasedness, correct noise statistics, discrimination against a wrong
//! covariance target, and optimality of the weighted fit on shared draws.

use correg::correlation::{ar1_correlation, CovarianceModel};
use correg::estimator::{estimator_weights, DesignMatrix};
use correg::monte_carlo::{
    empirical_estimator_covariance, peelle_demo, sample_correlated_noise, McConfig,
};
use nalgebra::{DMatrix, DVector};

fn three_point_problem() -> (DesignMatrix, DMatrix<f64>) {
    let mut x = DMatrix::zeros(3, 2);
    for i in 0..3 {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = i as f64;
    }
    let model =
        CovarianceModel::new(vec![1.0, 0.5, 1.2], ar1_correlation(3, 0.6).unwrap()).unwrap();
    (DesignMatrix::new(x).unwrap(), model.assemble())
}

#[test]
fn report_is_bit_identical_across_chunk_counts() {
    let (x, sigma) = three_point_problem();
    let base = McConfig::new(2000, 11, DVector::from_column_slice(&[0.3, -1.1]));
    let reference = empirical_estimator_covariance(&x, &sigma, &base).unwrap();
    for &chunks in &[3usize, 8, 64] {
        let config = base.clone().with_parallel_chunks(chunks);
        let report = empirical_estimator_covariance(&x, &sigma, &config).unwrap();
        assert_eq!(
            reference.empirical_mean.as_slice(),
            report.empirical_mean.as_slice(),
            "mean differs at {chunks} chunks"
        );
        assert_eq!(
            reference.empirical_covariance.as_slice(),
            report.empirical_covariance.as_slice(),
            "covariance differs at {chunks} chunks"
        );
    }
}

#[test]
fn estimates_are_unbiased_within_monte_carlo_error() {
    let (x, sigma) = three_point_problem();
    let config = McConfig::new(20_000, 5, DVector::from_column_slice(&[2.0, 0.25]));
    let report = empirical_estimator_covariance(&x, &sigma, &config).unwrap();
    assert!(
        report.max_mean_deviation <= 4.0,
        "mean deviates by {} standard errors",
        report.max_mean_deviation
    );
    assert!(
        report.max_standardized_deviation <= 4.0,
        "covariance deviates by {} standard errors",
        report.max_standardized_deviation
    );
}

#[test]
fn wrong_covariance_target_is_flagged() {
    // The 4-SE criterion must have discriminating power: scoring the same
    // empirical covariance against a 50%-inflated target blows far past it.
    let x = DesignMatrix::new(DMatrix::from_element(2, 1, 1.0)).unwrap();
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.25]);
    let config = McConfig::new(2000, 1, DVector::from_element(1, 0.0));
    let report = empirical_estimator_covariance(&x, &sigma, &config).unwrap();
    let t = report.trials as f64;

    let correct = report.analytic_covariance[(0, 0)];
    let empirical = report.empirical_covariance[(0, 0)];
    assert!((correct - 0.2).abs() <= 1e-12);
    assert!(report.max_standardized_deviation <= 4.0);

    let wrong = 0.3;
    let wrong_se = (2.0 * wrong * wrong / (t - 1.0)).sqrt();
    let standardized = (empirical - wrong).abs() / wrong_se;
    assert!(
        standardized > 4.0,
        "wrong target only {standardized:.2} SE away — criterion has no power"
    );
}

#[test]
fn noise_rows_extend_without_changing_prefix() {
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 0.64, 0.2, 0.1, 0.2, 1.44]);
    let short = sample_correlated_noise(&sigma, 5, 77).unwrap();
    let long = sample_correlated_noise(&sigma, 9, 77).unwrap();
    for t in 0..5 {
        for j in 0..3 {
            assert_eq!(
                short[(t, j)],
                long[(t, j)],
                "row {t} changed with draw count"
            );
        }
    }
}

#[test]
fn sampled_noise_reproduces_the_covariance() {
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 0.64, 0.2, 0.1, 0.2, 1.44]);
    let draws = 50_000;
    let noise = sample_correlated_noise(&sigma, draws, 123).unwrap();
    let mut scatter = DMatrix::zeros(3, 3);
    for t in 0..draws {
        let row = noise.row(t);
        for i in 0..3 {
            for j in 0..3 {
                scatter[(i, j)] += row[i] * row[j];
            }
        }
    }
    scatter /= draws as f64;
    for i in 0..3 {
        for j in 0..3 {
            let se =
                ((sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2)) / draws as f64).sqrt();
            let dev = (scatter[(i, j)] - sigma[(i, j)]).abs();
            assert!(
                dev <= 5.0 * se,
                "scatter[{i},{j}] off by {dev:.2e} (> 5 SE = {:.2e})",
                5.0 * se
            );
        }
    }
}

#[test]
fn weighted_fit_beats_plain_average_on_shared_draws() {
    // Both estimators see the exact same noise; the optimal weights must
    // give the smaller spread.
    let x = DesignMatrix::new(DMatrix::from_element(3, 1, 1.0)).unwrap();
    let model =
        CovarianceModel::new(vec![1.0, 0.5, 1.2], ar1_correlation(3, 0.5).unwrap()).unwrap();
    let sigma = model.assemble();
    let weights = estimator_weights(&x, &sigma).unwrap();

    let draws = 20_000;
    let noise = sample_correlated_noise(&sigma, draws, 9).unwrap();
    let (mut blue_sq, mut naive_sq) = (0.0f64, 0.0f64);
    for t in 0..draws {
        let eta = noise.row(t).transpose();
        let blue = (&weights * &eta)[0];
        let naive = eta.sum() / 3.0;
        blue_sq += blue * blue;
        naive_sq += naive * naive;
    }
    assert!(
        blue_sq < naive_sq,
        "weighted spread {blue_sq} not below plain average {naive_sq}"
    );
}

#[test]
fn demonstration_records_are_internally_consistent() {
    for trial in 0..50 {
        let record = peelle_demo(1.0, 0.5, 0.99, 2.5, trial).unwrap();
        assert!((record.w1 + record.w2 - 1.0).abs() <= 1e-12);
        let recomputed = record.w1 * record.y1 + record.w2 * record.y2;
        assert!((record.estimate - recomputed).abs() <= 1e-12);
        let (lo, hi) = (record.y1.min(record.y2), record.y1.max(record.y2));
        assert_eq!(
            record.outside_range,
            record.estimate < lo || record.estimate > hi,
            "outside_range flag inconsistent at trial {trial}"
        );
    }
}
