//! The two-measurement mean: closed-form variance and weights across
//! correlation strengths, and the negative-weight effect — with strong
//! enough correlation the optimal estimate always escapes the range of the
//! data it came from.
//!
//! Run with `cargo run --example two_point_peelle`.

use correg::estimator::{
    two_point_full_correlation_estimate, two_point_mean_variance, two_point_weights,
};
use correg::monte_carlo::peelle_demo;

fn main() -> Result<(), correg::Error> {
    let (sigma1, sigma2) = (1.0, 0.5);
    println!("one mean, two measurements, noise levels ({sigma1}, {sigma2})\n");

    println!("{:>6}  {:>10}  {:>8}  {:>8}", "rho", "variance", "w1", "w2");
    for rho in [-0.99, -0.5, 0.0, 0.3, 0.5, 0.6, 0.8, 0.95, 0.99] {
        let v = two_point_mean_variance(sigma1, sigma2, rho)?;
        let (w1, w2) = two_point_weights(sigma1, sigma2, rho)?;
        println!("{rho:>6}  {v:>10.6}  {w1:>8.4}  {w2:>8.4}");
    }

    // The variance peaks exactly where the noisier measurement's weight
    // crosses zero: rho = sigma2/sigma1. Beyond it, correlation is
    // information — the variance drops again and w1 turns negative.
    let rho_peak = sigma2 / sigma1;
    let v_peak = two_point_mean_variance(sigma1, sigma2, rho_peak)?;
    println!(
        "\npeak variance {v_peak} at rho = {rho_peak} (equals sigma2^2 = {})",
        sigma2 * sigma2
    );

    // At rho = 1 the pair determines the mean exactly.
    let v_full = two_point_mean_variance(sigma1, sigma2, 1.0)?;
    let estimate = two_point_full_correlation_estimate(1.2, 0.9, sigma1, sigma2)?;
    println!("variance at rho = 1: {v_full} (exact determination)");
    println!("fully correlated estimate from y = (1.2, 0.9): {estimate}\n");

    // A negative weight is not a curiosity: whenever w1 < 0 the estimate
    // w1*y1 + w2*y2 extrapolates outside [min(y), max(y)] for every draw
    // with y1 != y2.
    println!("sampled demonstrations at rho = 0.99, true mean 0:");
    println!(
        "{:>4}  {:>8}  {:>8}  {:>9}  {:>7}",
        "run", "y1", "y2", "estimate", "outside"
    );
    let mut outside = 0;
    for seed in 0..8 {
        let r = peelle_demo(sigma1, sigma2, 0.99, 0.0, seed)?;
        if r.outside_range {
            outside += 1;
        }
        println!(
            "{seed:>4}  {:>8.4}  {:>8.4}  {:>9.4}  {:>7}",
            r.y1, r.y2, r.estimate, r.outside_range
        );
    }
    println!("\n{outside}/8 estimates outside the data range");
    Ok(())
}
