use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;
use thiserror::Error;

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    code: u8,
    message: &'a str,
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    /// Writes the single-line JSON error record and returns the exit code.
    pub fn report(&self) -> ExitCode {
        let message = self.to_string();
        let line = serde_json::to_string(&ErrorLine {
            code: self.code(),
            message: &message,
        })
        .expect("error record serializes");
        eprintln!("{line}");
        ExitCode::from(self.code())
    }
}

impl From<cipd::Error> for CliError {
    fn from(e: cipd::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}
