use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer {layer}: coalitions drawn from {n} points must have size at most {max}", max = .n.saturating_sub(1))]
    InvalidLayer { layer: usize, n: usize },

    #[error("point {0} is already a member of the coalition")]
    DuplicateMember(usize),

    #[error("index {index} is out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("training diverged after {iterations} iterations (non-finite loss)")]
    Divergence { iterations: usize },

    #[error("training failed: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("exact enumeration refused: {n} players exceeds the guard of {max}")]
    EnumerationGuard { n: usize, max: usize },

    #[error("invalid band [{lower}, {upper}] for {n} points: need 1 <= lower <= upper <= n-1")]
    InvalidBand { lower: usize, upper: usize, n: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("correlation is undefined for a constant input vector")]
    UndefinedCorrelation,

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
