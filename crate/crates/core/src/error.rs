use thiserror::Error;

/// Errors produced by the search library.
#[derive(Debug, Error)]
pub enum Error {
    /// A DEM or overlay stream failed to parse.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Input parsed but its shape is inconsistent.
    #[error("structural error: {0}")]
    Structure(String),

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No traversable route connects the two cells.
    #[error("no path from cell {start} to cell {goal}")]
    Unreachable { start: usize, goal: usize },

    /// A mission or experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
