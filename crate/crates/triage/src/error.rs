//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A corpus file could not be parsed. `line` is 1-based where known.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<u64>, message: String },

    /// A contract precondition was violated by the caller.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// Remote call failed after all retries were exhausted.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    /// A projection head mapped an embedding to the zero vector.
    #[error("degenerate projection: projected embedding has zero norm")]
    DegenerateProjection,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn data(line: impl Into<Option<u64>>, message: impl Into<String>) -> Self {
        Error::Data {
            line: line.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
