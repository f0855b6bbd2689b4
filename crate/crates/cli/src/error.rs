use finsec::FsmError;
use std::path::PathBuf;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Validation {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn numerical(context: &str, e: FsmError) -> Self {
        CliError::Numerical(format!("{context}: {e}"))
    }
}
