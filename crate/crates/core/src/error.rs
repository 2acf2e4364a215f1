use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user configuration: missing columns, invalid flags, bad sizes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data. `row` is 1-based and counts data rows only.
    #[error("data error at row {row}, column `{column}`: {message}")]
    DataCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    /// Caller violated a documented precondition (index out of range,
    /// mismatched dimensions).
    #[error("usage error: {0}")]
    Usage(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity could not be evaluated for the given input.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The analytic-center subproblem failed (interior collapse or no Newton
    /// progress).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cache file {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
