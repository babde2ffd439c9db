//! Experiment runner for the `stein-drift` estimators: path simulation, gain
//! curves and surfaces, risk tables, the Gaussian constant, Bayes risk and
//! the acceptance checks.

use std::fmt;

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use config::Settings;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or files. Exit code 2.
    Usage(String),
    /// Numerical or acceptance failure. Exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<stein_drift::Error> for CliError {
    fn from(e: stein_drift::Error) -> Self {
        use stein_drift::Error as E;
        match e {
            E::InvalidParameter { .. } | E::OrderTooLarge { .. } | E::GridMismatch(_) | E::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            E::Singular | E::Io(_) => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o error: {e}"))
    }
}
