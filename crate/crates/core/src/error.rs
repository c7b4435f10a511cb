use std::io;

use thiserror::Error;

/// Errors produced by the decomposition solvers, the data pipeline and the
/// model/report serializers.
#[derive(Debug, Error)]
pub enum CsrrError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid cost model: {0}")]
    InvalidCost(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numeric failure in {routine} ({rows}x{cols} input): {detail}")]
    NumericFailure {
        routine: &'static str,
        rows: usize,
        cols: usize,
        detail: String,
    },

    #[error("solver diverged at iteration {iteration} (objective {objective}); try a smaller step size")]
    Divergence { iteration: usize, objective: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("metric is undefined: {0}")]
    UndefinedMetric(String),

    #[error("model file format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CsrrError>;

pub(crate) fn dims(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
