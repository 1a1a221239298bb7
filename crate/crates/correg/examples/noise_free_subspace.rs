//! Working in the noise covariance's eigenbasis.
//!
//! Near full correlation the covariance develops near-zero eigenvalues.
//! Rotating the regression into the eigenbasis turns those directions into
//! (almost) noise-free linear equations on the parameters — this example
//! decomposes a nearly degenerate covariance, shows the rotated system,
//! checks whether the dominant direction lies in the design's column
//! space, and reparametrizes the design to split the surviving noisy
//! coordinate from the exactly determined ones.
//!
//! Run with `cargo run --example noise_free_subspace`.

use correg::correlation::{ar1_correlation, CovarianceModel};
use correg::estimator::{DesignMatrix, Observation};
use correg::subspace::{
    column_space_membership, reduced_design, reparametrize, spectral_decompose,
    transform_to_eigenbasis,
};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), correg::Error> {
    // Three measurements, correlation 0.999999 between neighbors.
    let sigmas = vec![1.0, 0.5, 0.8];
    let model = CovarianceModel::new(sigmas.clone(), ar1_correlation(3, 1.0 - 1e-6)?)?;
    let sigma = model.assemble();

    let spectral = spectral_decompose(&sigma)?;
    println!("covariance eigenvalues (descending):");
    for j in 0..spectral.n() {
        println!("  lambda_{j} = {:.6e}", spectral.lambda(j));
    }
    println!(
        "condition ratio lambda_min/lambda_max = {:.3e}\n",
        spectral.condition_ratio()
    );

    // Rotate a small regression into that basis.
    let x = DesignMatrix::new(DMatrix::from_column_slice(
        3,
        2,
        &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0],
    ))?;
    let y = Observation::new(DVector::from_column_slice(&[1.05, 0.52, 0.83]))?;
    let t = transform_to_eigenbasis(&y, &x, &spectral)?;
    println!("rotated rows (noise variance | equation):");
    for i in 0..3 {
        println!(
            "  {:>10.3e} | {:+.4} b1 {:+.4} b2 = {:+.4}",
            t.lambdas[i],
            t.x_tilde[(i, 0)],
            t.x_tilde[(i, 1)],
            t.z[i]
        );
    }
    println!("rows with tiny variance are (almost) exact constraints\n");

    // Does the dominant noise direction live in the design's column space?
    let q1 = spectral.eigenvector(0).into_owned();
    let membership = column_space_membership(&x, &q1, 1e-8)?;
    println!(
        "dominant eigenvector in column space: {} (residual {:.3e})",
        membership.member, membership.residual
    );

    // Reparametrize the design so the first new coordinate points along
    // a chosen column-space vector; the rest are noise-orthogonal.
    let target = x.matrix().column(0).into_owned().normalize();
    let w = reparametrize(&x, &target)?;
    println!("\nreparametrization matrix W (first column maps onto the target):");
    for i in 0..w.nrows() {
        let row: Vec<String> = (0..w.ncols())
            .map(|j| format!("{:+.4}", w[(i, j)]))
            .collect();
        println!("  [{}]", row.join(", "));
    }

    // Dropping the dominant direction leaves this much design rank.
    let reduced = reduced_design(&x, &spectral, 1)?;
    println!(
        "\ndesign rank after projecting out the top eigendirection: {}",
        reduced.rank
    );
    Ok(())
}
