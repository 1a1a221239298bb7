//! Planning a measurement campaign under exponentially correlated noise.
//!
//! Equidistant measurements on [0, 1] with correlation length delta: once
//! the spacing drops below delta, extra measurements land inside one
//! correlation length and stop paying. This example shows the variance
//! plateau, compares the exact inverse variance with its large-n
//! asymptotic form, and finds the worst-case correlation length for a
//! sloped signal-to-noise profile.
//!
//! Run with `cargo run --example sampling_design`.

use correg::sampling::{
    delta_at_max_variance, inverse_variance_asymptotic, inverse_variance_exact, limiting_variance,
    SamplingPlan, SnrProfile,
};

fn main() -> Result<(), correg::Error> {
    // Signal-to-noise rising linearly from 0.5 to 1 across the interval.
    let profile = SnrProfile::linear(1.0, 1.0)?.normalized();
    let delta = 1.0;

    println!("variance of the mean estimate at delta = {delta}:");
    println!("{:>6}  {:>12}", "n", "variance");
    for n in [1usize, 2, 4, 8, 16, 32, 64, 128] {
        let plan = SamplingPlan::new(n, delta, profile.clone())?;
        let v = 1.0 / inverse_variance_exact(&plan)?;
        println!("{n:>6}  {v:>12.8}");
    }
    let floor = limiting_variance(&profile, delta)?;
    println!("{:>6}  {floor:>12.8}  <- n -> infinity floor\n", "inf");

    // The asymptotic form is accurate to O(1/(delta*n)^2).
    println!("exact vs asymptotic inverse variance:");
    println!(
        "{:>6}  {:>12}  {:>12}  {:>10}",
        "n", "exact", "asymptotic", "rel gap"
    );
    for n in [4usize, 8, 16, 32, 64] {
        let plan = SamplingPlan::new(n, delta, profile.clone())?;
        let exact = inverse_variance_exact(&plan)?;
        let asym = inverse_variance_asymptotic(&profile, delta, n)?;
        let gap = ((exact - asym.leading) / exact).abs();
        println!(
            "{n:>6}  {exact:>12.8}  {:>12.8}  {gap:>10.2e}",
            asym.leading
        );
    }

    // Against intuition, an intermediate correlation length is worst: at
    // small delta points decouple, at large delta the rising part of the
    // profile can be exploited. The maximum sits at the closed form
    // delta^2 = (integral of tau^2) / (integral of tau'^2).
    let worst = delta_at_max_variance(&profile)?;
    println!("\nworst correlation length for this profile: delta = {worst:.6}");
    for d in [0.5 * worst, worst, 2.0 * worst] {
        println!(
            "  limiting variance at delta = {d:.4}: {:.6}",
            limiting_variance(&profile, d)?
        );
    }
    Ok(())
}
