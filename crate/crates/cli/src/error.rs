use serde::Serialize;
use thiserror::Error;

use agent_causal::error::Error as CoreError;

/// A failed request: HTTP status plus the structured `{code, message}` body.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{code}: {message}")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into() }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(404, "not-found", format!("unknown {what} `{id}`"))
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(422, "schema-violation", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(409, code, message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::UnknownEnv(_) | CoreError::UnknownAgent(_) | CoreError::UnknownExperiment(_) => {
                ApiError::new(404, "not-found", message)
            }
            CoreError::IllegalIntervention(_)
            | CoreError::TimeOutOfRange { .. }
            | CoreError::EpisodeOver => ApiError::new(409, "illegal-intervention", message),
            CoreError::ZeroEvidence | CoreError::ZeroLikelihood => ApiError::new(422, "zero-evidence", message),
            CoreError::Io(_) => ApiError::new(500, "io", message),
            _ => ApiError::new(422, "schema-violation", message),
        }
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::schema(e.to_string())
    }
}

/// Failures of the command-line runner, mapped to exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Results fell outside the reference tolerances.
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Service(#[from] ApiError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            _ => 2,
        }
    }
}
