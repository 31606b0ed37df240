use qet_core::QetError;
use thiserror::Error;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration: unknown key, type mismatch, bad section.
    #[error("{0}")]
    Config(String),

    /// A parameter violated a module precondition.
    #[error("{0}")]
    Validation(String),

    /// Convergence or conditioning failure inside a module.
    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(what: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{what}: {e}"))
    }

    /// Wraps a module error, attributing parameter errors via `locate`.
    pub fn from_module(cmd: &str, e: QetError, locate: impl Fn(&str) -> Option<String>) -> Self {
        match &e {
            QetError::Numerical(_) => CliError::Numerical(format!("{cmd}: {e}")),
            QetError::InvalidParameter { name, reason } => match locate(name) {
                Some(place) => CliError::Validation(format!("{cmd}: invalid value for {place}: {reason}")),
                None => CliError::Validation(format!("{cmd}: {e}")),
            },
            _ => CliError::Validation(format!("{cmd}: {e}")),
        }
    }
}
