use thiserror::Error;

/// Errors raised by the covert-communication toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {intervals} subintervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("shape p = {p} is not supported here: {reason}")]
    UnsupportedShape { p: f64, reason: &'static str },

    #[error("matrix is not positive definite: leading minor of order {order} is not positive (pivot {pivot:e})")]
    NotPositiveDefinite { order: usize, pivot: f64 },

    #[error("matrix is singular or too ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("characteristic function nearly vanishes at t = {t:e} (value {value:e})")]
    CharacteristicFunctionZero { t: f64, value: f64 },

    #[error("matrix entry at row {row}, column {column}: {reason}")]
    MatrixEntry {
        row: usize,
        column: usize,
        reason: String,
    },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
