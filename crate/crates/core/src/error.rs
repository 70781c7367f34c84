use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration is internally inconsistent (bad widths, label mismatch,
    /// exhausted exemplar budget, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor or vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid runtime input (empty dataset, label out of range, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Malformed external data, with a 1-based location where known.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
