//! Run orchestration for the qwork pipeline: configuration parsing, the
//! end-to-end experiment runner with artifact persistence, plotting, the
//! brute-force oracle command, and the selftest battery.

pub mod config;
pub mod oracle;
pub mod plot;
pub mod run;
pub mod selftest;

use std::fmt;

/// Errors with the exit-code semantics of the binary: configuration problems
/// exit 2, numerical failures exit 3, I/O problems exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage {
        stage: &'static str,
        source: qwork::Error,
    },
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Stage { stage, source } => write!(f, "{stage}: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Attaches a pipeline stage label to module errors.
pub(crate) fn at_stage<T>(stage: &'static str, r: qwork::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Stage { stage, source })
}

pub type CliResult<T> = Result<T, CliError>;
