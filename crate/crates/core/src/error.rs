use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the reputation engine and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("insufficient candidates: need {needed}, have {available}")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("invalid url {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("corrupt input {path}: {malformed} of {total} lines malformed")]
    CorruptInput {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidEdge(_) => "invalid-edge",
            Error::InvalidLabels(_) => "invalid-labels",
            Error::NotFound(_) => "not-found",
            Error::InconsistentState(_) => "inconsistent-state",
            Error::InsufficientCandidates { .. } => "insufficient-candidates",
            Error::DegenerateTraining(_) => "degenerate-training",
            Error::InvalidUrl { .. } => "invalid-url",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidStream(_) => "invalid-stream",
            Error::CorruptInput { .. } => "corrupt-input",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}
