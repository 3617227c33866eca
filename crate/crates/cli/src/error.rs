use thiserror::Error;

/// Failures surfaced by the command-line front end, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or bad arguments.
    #[error("{0}")]
    Input(String),

    /// The scenario parsed but fails the model assumptions or graph checks.
    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Solver(#[from] mtmse::error::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
