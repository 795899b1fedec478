//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Errors produced by dynident operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A vector field or model produced a non-finite value.
    #[error("numeric domain error in `{system}`: {detail}")]
    NumericDomain { system: String, detail: String },

    /// State norm crossed the overflow guard during integration.
    #[error("integration of `{system}` diverged at t = {time}")]
    Divergence { system: String, time: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("ill-conditioned Gram matrix (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// Training produced a non-finite loss.
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (alignment = {alignment}, sufficiency = {sufficiency})"
    )]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        alignment: f64,
        sufficiency: f64,
    },

    /// Configuration validation failure; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NumericDomain { .. } => "numeric_domain",
            Error::Divergence { .. } => "divergence",
            Error::Unsupported(_) => "unsupported",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::EstimationFailure(_) => "estimation_failure",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
