use std::fmt;

use thiserror::Error;

/// Which line of a matrix failed a centering check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("matrix must be at least 2x2, got n = {0}")]
    TooSmall(usize),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not centered: {axis} {index} sums to {sum:e} (tolerance {tol:e})")]
    NotCentered {
        axis: Axis,
        index: usize,
        sum: f64,
        tol: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("distribution matrix is {dists}x{dists} but coefficient matrix is {matrix}x{matrix}")]
    DimensionMismatch { matrix: usize, dists: usize },

    #[error("B_n = {0:e} is not positive; the instance is degenerate")]
    DegenerateInstance(f64),

    #[error("moment E|Y|^{order} diverges for {family}")]
    DivergentMoment { order: f64, family: String },

    #[error("cell ({row}, {col}) has an infinite third absolute moment")]
    InfiniteThirdMoment { row: usize, col: usize },

    #[error("invalid g: {reason} between x = {x_lo:e} and x = {x_hi:e}")]
    InvalidG {
        x_lo: f64,
        x_hi: f64,
        reason: &'static str,
    },

    #[error("cell ({row}, {col}) is not a discrete law; exact enumeration is impossible")]
    NonDiscrete { row: usize, col: usize },

    #[error("enumeration cost {cost:e} exceeds budget {budget:e}")]
    BudgetExceeded { cost: f64, budget: f64 },

    #[error("instance is not normalized: B_n = {0}")]
    NotNormalized(f64),

    #[error("quadrature did not converge after {intervals} subintervals (estimate {estimate:e}, error {error:e})")]
    NoConvergence {
        intervals: usize,
        estimate: f64,
        error: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error in {source_name}: {message}")]
    Config { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Variant name, used as a status label in tabular output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::TooSmall(_) => "TooSmall",
            Error::NonFinite { .. } => "NonFinite",
            Error::NotCentered { .. } => "NotCentered",
            Error::InvalidDist(_) => "InvalidDist",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateInstance(_) => "DegenerateInstance",
            Error::DivergentMoment { .. } => "DivergentMoment",
            Error::InfiniteThirdMoment { .. } => "InfiniteThirdMoment",
            Error::InvalidG { .. } => "InvalidG",
            Error::NonDiscrete { .. } => "NonDiscrete",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::NotNormalized(_) => "NotNormalized",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Config { .. } => "ConfigError",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
