use std::io;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: parse error: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: invalid value: {message}")]
    Validation { line: u64, message: String },

    /// A caller broke an input precondition (unsorted stream, irregular grid, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("model format error: {0}")]
    Model(String),

    #[error("{0}")]
    Unsatisfiable(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Wraps a failure with the experiment cell it came from.
    #[error("{model}/{variant}: {source}")]
    Cell {
        model: String,
        variant: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
