use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("invalid configuration at {path}: {message}")]
    Config { path: String, message: String },
    #[error("analysis {analysis} failed: {message}")]
    Analysis { analysis: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Machine-readable form written to `error.json`.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorRecord<'a> {
    Config { path: &'a str, message: &'a str },
    Analysis { analysis: &'a str, message: &'a str },
    Io { message: &'a str },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Analysis { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord<'_> {
        match self {
            CliError::Config { path, message } => ErrorRecord::Config { path, message },
            CliError::Analysis { analysis, message } => ErrorRecord::Analysis { analysis, message },
            CliError::Io(message) => ErrorRecord::Io { message },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
