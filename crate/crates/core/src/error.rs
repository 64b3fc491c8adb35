use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient observations: need at least {needed}, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("non-finite or negative observation {0} in monitor history")]
    InvalidObservation(f64),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("no data to chart in {0}")]
    EmptyTrace(PathBuf),

    #[error("chart rendering failed: {0}")]
    Chart(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short machine-readable tag used on the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::InvalidObservation(_) => "invalid_observation",
            Error::Parse(_) => "parse",
            Error::UnknownScenario(_) => "unknown_scenario",
            Error::EmptyTrace(_) => "empty_trace",
            Error::Chart(_) => "chart",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
