//! Error taxonomy shared by the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A container file could not be parsed; names the offending field.
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A metric is undefined for the given input.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A pipeline stage was invoked before its prerequisite stage.
    #[error("missing prerequisite: run `{stage}` first ({detail})")]
    MissingStage { stage: String, detail: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        CoreError::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
