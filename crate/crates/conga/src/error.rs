//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CongaError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "count {count} at observation {observation}, node {node} exceeds truncation level B={b}"
    )]
    Truncation {
        observation: usize,
        node: usize,
        count: u64,
        b: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse {
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("empty sample store")]
    EmptySamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CongaError {
    /// Process exit code for the CLI: 2 for input problems, 3 for numeric
    /// or truncation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CongaError::Truncation { .. } | CongaError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CongaError>;
