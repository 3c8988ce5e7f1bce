use std::path::PathBuf;

use thiserror::Error;

use crate::problems::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("negative damping: gamma({x}) = {value}")]
    NegativeDamping { x: f64, value: f64 },

    #[error("unsupported Pade order ({s},{t}): need 0 <= S,T <= 4 and S+T >= 1")]
    UnsupportedOrder { s: usize, t: usize },

    #[error("rational approximant has a pole near theta = {theta} (|Q| = {denominator:e})")]
    Pole { theta: f64, denominator: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerically singular matrix: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("dense oracle limited to dimension 200, operator has dimension {0}")]
    OracleTooLarge(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{steps} time steps requested, limit is {limit}")]
    TooManySteps { steps: f64, limit: usize },

    #[error("problem has no exact solution")]
    MissingExact,

    #[error("problem config: {0}")]
    Config(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
