//! JSON problem files: a self-contained description of one regression
//! problem — design matrix, measurements, noise levels, and the noise
//! correlation (either explicit entries or a named family).
//!
//! ```json
//! {
//!   "design": [[1.0], [1.0]],
//!   "y": [1.2, 0.9],
//!   "sigma": [1.0, 0.5],
//!   "correlation": {"model": "ar1", "rho": 0.8}
//! }
//! ```
//!
//! `correlation` alternatively takes explicit entries
//! (`[[1.0, 0.8], [0.8, 1.0]]`) or an exponential-decay family
//! (`{"model": "exp", "delta": 0.5, "locations": [0.0, 1.0]}`).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::correlation::{
    ar1_correlation, exponential_correlation, CorrelationMatrix, CovarianceModel,
};
use crate::estimator::{DesignMatrix, Observation};
use crate::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemWire {
    design: Vec<Vec<f64>>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    correlation: CorrelationWire,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CorrelationWire {
    Family(FamilyWire),
    Entries(Vec<Vec<f64>>),
}

#[derive(Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
enum FamilyWire {
    Ar1 { rho: f64 },
    Exp { delta: f64, locations: Vec<f64> },
}

/// A parsed and validated regression problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub design: DesignMatrix,
    pub y: Observation,
    pub model: CovarianceModel,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn m(&self) -> usize {
        self.design.m()
    }

    /// The assembled noise covariance `Σᵢⱼ = σᵢσⱼϱᵢⱼ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.model.assemble()
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::ProblemValidation {
            field: field.into(),
            message: "must be a non-empty rectangular array of numbers".into(),
        });
    }
    let cols = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::ProblemValidation {
                field: field.into(),
                message: format!(
                    "row {i} has {} entries but row 0 has {cols} (array must be rectangular)",
                    row.len()
                ),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Parse a problem from JSON text. Syntax errors carry serde's line/column
/// context; semantic errors name the offending field.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let wire: ProblemWire = serde_json::from_str(text)?;

    let design = DesignMatrix::new(rows_to_matrix(&wire.design, "design")?)?;
    let n = design.n();

    if wire.y.len() != n {
        return Err(Error::ProblemValidation {
            field: "y".into(),
            message: format!(
                "expected {n} measurements to match the design rows, got {}",
                wire.y.len()
            ),
        });
    }
    let y = Observation::new(DVector::from_vec(wire.y))?;

    if wire.sigma.len() != n {
        return Err(Error::ProblemValidation {
            field: "sigma".into(),
            message: format!(
                "expected {n} noise levels to match the design rows, got {}",
                wire.sigma.len()
            ),
        });
    }

    let correlation = build_correlation(&wire.correlation, n)?;
    let model = CovarianceModel::new(wire.sigma, correlation)?;

    Ok(Problem { design, y, model })
}

fn build_correlation(wire: &CorrelationWire, n: usize) -> Result<CorrelationMatrix> {
    match wire {
        CorrelationWire::Entries(rows) => {
            let matrix = rows_to_matrix(rows, "correlation")?;
            if matrix.nrows() != n || matrix.ncols() != n {
                return Err(Error::ProblemValidation {
                    field: "correlation".into(),
                    message: format!(
                        "expected a {n}x{n} matrix to match the design rows, got {}x{}",
                        matrix.nrows(),
                        matrix.ncols()
                    ),
                });
            }
            CorrelationMatrix::from_entries(matrix)
        }
        CorrelationWire::Family(FamilyWire::Ar1 { rho }) => ar1_correlation(n, *rho),
        CorrelationWire::Family(FamilyWire::Exp { delta, locations }) => {
            if locations.len() != n {
                return Err(Error::ProblemValidation {
                    field: "correlation.locations".into(),
                    message: format!(
                        "expected {n} locations to match the design rows, got {}",
                        locations.len()
                    ),
                });
            }
            exponential_correlation(locations, *delta)
        }
    }
}

/// Read and parse a problem file.
pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)?;
    parse_problem(&text)
}
