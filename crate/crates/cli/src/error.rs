use thiserror::Error;

/// Failures of the command-line tool, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration or a flag is invalid (exit status 1).
    #[error("config error: {0}")]
    Config(String),

    /// Something went wrong while running or reading results (exit status 2).
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<star_core::Error> for CliError {
    fn from(e: star_core::Error) -> Self {
        match e {
            star_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
