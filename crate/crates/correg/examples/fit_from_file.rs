//! Fitting a problem described in a JSON file.
//!
//! Pass a path to your own problem file, or run without arguments to use
//! the built-in demonstration problem. The report combines the fit (when
//! the covariance is well-conditioned enough to solve), weight
//! diagnostics, and the full-correlation limit analysis.
//!
//! Run with `cargo run --example fit_from_file [-- path/to/problem.json]`.

use correg::cli::analyze_report;
use correg::problem::{load_problem, parse_problem};

const DEMO: &str = r#"{
    "design": [[1.0, 0.0], [1.0, 0.5], [1.0, 1.0]],
    "y": [0.31, 0.60, 0.91],
    "sigma": [0.25, 0.3, 0.25],
    "correlation": {"model": "exp", "delta": 0.4, "locations": [0.0, 0.5, 1.0]}
}"#;

fn main() -> Result<(), correg::Error> {
    let problem = match std::env::args().nth(1) {
        Some(path) => load_problem(std::path::Path::new(&path))?,
        None => {
            println!("no file given; using the built-in demonstration problem\n");
            parse_problem(DEMO)?
        }
    };

    println!(
        "{} measurements, {} parameters, design rank {}",
        problem.n(),
        problem.m(),
        problem.design.rank()
    );

    let report = analyze_report(&problem, 0.5)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report is plain JSON")
    );
    Ok(())
}
