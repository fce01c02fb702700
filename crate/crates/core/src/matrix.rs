//! The deterministic coefficient matrix `c_ij` with zero row and column sums.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Relative factor of the default centering tolerance, `1e-10 * max(1, max|c_ij|)`.
pub const CENTER_TOL_FACTOR: f64 = 1e-10;

/// A validated `n x n` matrix (`n >= 2`) whose rows and columns all sum to zero.
///
/// Entries are stored row-major. The type is immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientMatrix {
    n: usize,
    #[serde(skip)]
    entries: Vec<f64>,
}

fn check_shape(rows: &[Vec<f64>]) -> Result<usize> {
    let n = rows.len();
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
        if let Some(col) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    Ok(n)
}

fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flat_map(|r| r.iter().copied()).collect()
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// The default centering tolerance for a raw matrix.
pub fn default_tolerance(rows: &[Vec<f64>]) -> f64 {
    let m = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    CENTER_TOL_FACTOR * m.max(1.0)
}

impl CoefficientMatrix {
    /// Accept `rows` iff every row and column sum has magnitude at most `tol`.
    pub fn validate_centered(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let n = check_shape(rows)?;
        let entries = flatten(rows);
        let m = CoefficientMatrix { n, entries };

        let mut worst: Option<(Axis, usize, f64)> = None;
        let mut consider = |axis, index, sum: f64| {
            if sum.abs() > tol && worst.is_none_or(|(_, _, w)| sum.abs() > w.abs()) {
                worst = Some((axis, index, sum));
            }
        };
        for i in 0..n {
            consider(Axis::Row, i, m.row_sum(i));
        }
        for j in 0..n {
            consider(Axis::Column, j, m.col_sum(j));
        }
        match worst {
            Some((axis, index, sum)) => Err(Error::NotCentered {
                axis,
                index,
                sum,
                tol,
            }),
            None => Ok(m),
        }
    }

    /// Validate with the default relative tolerance.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        Self::validate_centered(rows, default_tolerance(rows))
    }

    /// Remove row, column and grand means: `c_ij - r_i - k_j + g`.
    pub fn double_center(rows: &[Vec<f64>]) -> Result<Self> {
        let n = check_shape(rows)?;
        let nf = n as f64;
        let row_mean: Vec<f64> = rows
            .iter()
            .map(|r| numeric::sum(r.iter().copied()) / nf)
            .collect();
        let col_mean: Vec<f64> = (0..n)
            .map(|j| numeric::sum(rows.iter().map(|r| r[j])) / nf)
            .collect();
        let grand = numeric::sum(rows.iter().flat_map(|r| r.iter().copied())) / (nf * nf);
        let mut entries = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            for (j, &c) in r.iter().enumerate() {
                let mut acc = CompensatedSum::new();
                acc.add(c);
                acc.add(-row_mean[i]);
                acc.add(-col_mean[j]);
                acc.add(grand);
                entries.push(acc.value());
            }
        }
        Ok(CoefficientMatrix { n, entries })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        Ok(CoefficientMatrix {
            n,
            entries: vec![0.0; n * n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        numeric::sum(self.row(i).iter().copied())
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        numeric::sum((0..self.n).map(|i| self.get(i, j)))
    }

    /// Multiply every entry by `s`; centering is preserved exactly in real arithmetic.
    pub fn scaled(&self, s: f64) -> Self {
        CoefficientMatrix {
            n: self.n,
            entries: self.entries.iter().map(|c| c * s).collect(),
        }
    }

    /// Matrix with entry `(i, j)` taken from `(rows[i], cols[j])`.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for &r in rows {
            for &c in cols {
                entries.push(self.get(r, c));
            }
        }
        CoefficientMatrix { n, entries }
    }

    /// `(1/(n-1)) * sum c_ij^2`, the permutation part of `B_n`.
    pub fn variance_term(&self) -> f64 {
        numeric::sum(self.entries.iter().map(|c| c * c)) / (self.n as f64 - 1.0)
    }

    /// `sum |c_ij|^3`.
    pub fn abs_cube_sum(&self) -> f64 {
        numeric::sum(self.entries.iter().map(|c| c.abs().powi(3)))
    }

    /// `C_n = (1/n) * sum |c_ij|^3`.
    pub fn third_term(&self) -> f64 {
        self.abs_cube_sum() / self.n as f64
    }
}

/// Parse a matrix given as a JSON 2-D array.
pub fn rows_from_json(text: &str) -> Result<Vec<Vec<f64>>> {
    serde_json::from_str(text).map_err(|e| Error::Config {
        source_name: "matrix".into(),
        message: e.to_string(),
    })
}

/// Parse a matrix given as CSV, one row per line, no header.
pub fn rows_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Config {
            source_name: "matrix csv".into(),
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|e| Error::Config {
                    source_name: "matrix csv".into(),
                    message: format!("line {}, column {}: {:?}: {}", line + 1, col + 1, field, e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

// Deserialize as a raw 2-D array, validating with the default tolerance.
impl<'de> Deserialize<'de> for CoefficientMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        CoefficientMatrix::new(&rows).map_err(serde::de::Error::custom)
    }
}
