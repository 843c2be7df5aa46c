use thiserror::Error;

use stopgame_core::StopGameError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] StopGameError),

    #[error("certification failed: {0}")]
    Certification(String),
}

impl CliError {
    /// 1 for failed certificates, 2 for bad input, 3 for desk-scale caps.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Certification(_) => 1,
            CliError::Core(e) => match e {
                StopGameError::GuardExceeded { .. } => 3,
                StopGameError::CertificationFailed { .. }
                | StopGameError::WindowCertificationFailed { .. }
                | StopGameError::TheoremViolation(_) => 1,
                _ => 2,
            },
            CliError::Parse(_) | CliError::Validation(_) | CliError::Io { .. } => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
