use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite score {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("calibration set must contain both classes")]
    SingleClass,

    #[error("fitting did not converge after {iterations} iterations (gradient norm {grad_norm:e}, last iterate {last:?})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
