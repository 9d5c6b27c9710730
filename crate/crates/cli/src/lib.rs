//! Library half of the `fredholm` command-line tool: configuration parsing
//! and the subcommands, so they can be driven from tests.

pub mod commands;
pub mod config;

use std::fmt;

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration or input data (exit 2).
    Config(String),
    /// The solver hit a non-finite value (exit 3).
    Numerical(String),
    /// Writing artefacts failed (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fredholm::Error> for CliError {
    fn from(e: fredholm::Error) -> Self {
        use fredholm::Error as E;
        match e {
            E::Numerical { .. } => CliError::Numerical(e.to_string()),
            E::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
