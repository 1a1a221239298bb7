//! Serialization helpers with reproducible number formatting.
//!
//! Data files written by this crate (matrix JSON/CSV, curve tables) format
//! every floating-point value with 17 significant digits, which is enough to
//! round-trip any `f64` exactly. Output is assembled by hand rather than
//! through a generic serializer so that byte-identical reruns are guaranteed.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Formats `x` with 17 significant digits (scientific notation). Parsing the
/// result back yields the original bit pattern.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a matrix as `{"n": rows, "m": cols, "entries": [[...], ...]}`
/// with row-major nested arrays.
pub fn matrix_to_json(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(32 + m.len() * 24);
    out.push_str(&format!(
        "{{\"n\":{},\"m\":{},\"entries\":[",
        m.nrows(),
        m.ncols()
    ));
    for i in 0..m.nrows() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(i, j)]));
        }
        out.push(']');
    }
    out.push_str("]}");
    out
}

/// Parses the matrix JSON produced by [`matrix_to_json`].
pub fn matrix_from_json(text: &str) -> Result<DMatrix<f64>> {
    #[derive(serde::Deserialize)]
    struct Wire {
        n: usize,
        m: Option<usize>,
        entries: Vec<Vec<f64>>,
    }
    let wire: Wire = serde_json::from_str(text)?;
    let cols = wire.m.unwrap_or(wire.n);
    if wire.entries.len() != wire.n {
        return Err(Error::DimensionMismatch {
            context: "matrix JSON rows",
            expected: wire.n,
            actual: wire.entries.len(),
        });
    }
    for row in &wire.entries {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                context: "matrix JSON row length",
                expected: cols,
                actual: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(wire.n, cols, |i, j| wire.entries[i][j]))
}

/// Serializes a matrix as headerless CSV, one row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parses headerless CSV into a matrix; all rows must have equal length.
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::InvalidGrid {
                message: format!(
                    "CSV line {}: cannot parse `{}` as a number",
                    lineno + 1,
                    field
                ),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    context: "CSV row length",
                    expected: first.len(),
                    actual: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidGrid {
            message: "CSV contains no rows".into(),
        });
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// The x-axis of a curve table: sample counts or real-valued points.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Counts(Vec<usize>),
    Points(Vec<f64>),
}

impl Axis {
    pub fn len(&self) -> usize {
        match self {
            Axis::Counts(v) => v.len(),
            Axis::Points(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn format_entry(&self, i: usize) -> String {
        match self {
            Axis::Counts(v) => v[i].to_string(),
            Axis::Points(v) => format_float(v[i]),
        }
    }
}

/// One named column of a curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// A table of curves sharing one x-axis; the shape behind the figure
/// commands. Emits CSV (header row, x first) or JSON (a `series` array).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    x_label: String,
    x: Axis,
    series: Vec<Series>,
}

impl CurveTable {
    pub fn new(x_label: impl Into<String>, x: Axis, series: Vec<Series>) -> Result<Self> {
        let x_label = x_label.into();
        if x.is_empty() {
            return Err(Error::InvalidGrid {
                message: format!("curve table `{x_label}` has an empty axis"),
            });
        }
        for s in &series {
            if s.values.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    context: "curve series length",
                    expected: x.len(),
                    actual: s.values.len(),
                });
            }
        }
        Ok(CurveTable { x_label, x, series })
    }

    pub fn x_label(&self) -> &str {
        &self.x_label
    }

    pub fn x(&self) -> &Axis {
        &self.x
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.x_label);
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for i in 0..self.x.len() {
            out.push_str(&self.x.format_entry(i));
            for s in &self.series {
                out.push(',');
                out.push_str(&format_float(s.values[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\"x_label\":{},\"x\":[",
            serde_json::to_string(&self.x_label).expect("string serializes")
        ));
        for i in 0..self.x.len() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&self.x.format_entry(i));
        }
        out.push_str("],\"series\":[");
        for (k, s) in self.series.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "{{\"name\":{},\"values\":[",
                serde_json::to_string(&s.name).expect("string serializes")
            ));
            for (i, v) in s.values.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format_float(*v));
            }
            out.push_str("]}");
        }
        out.push_str("]}");
        out
    }
}

/// Formats a vector as a JSON array with exact float formatting.
pub fn vector_to_json(v: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_float(*x));
    }
    out.push(']');
    out
}
