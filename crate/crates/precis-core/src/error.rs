use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("column {0} is constant (zero variance)")]
    DegenerateColumn(usize),

    #[error("regression failed for columns {0:?}")]
    ColumnFailures(Vec<(usize, String)>),

    #[error("near-zero denominator on tree edge {child}-{parent}")]
    DivisionByNearZero { child: usize, parent: usize },

    #[error("phi[{0}] is not strictly positive")]
    ZeroPhi(usize),

    #[error("node {0} out of range for graph of size {1}")]
    NodeOutOfRange(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
