use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    ManifestRecord { line: usize, message: String },

    #[error("duplicate study id `{0}`")]
    DuplicateId(String),

    #[error("image for study `{id}`: {message}")]
    Image { id: String, message: String },

    #[error("invalid synthetic spec: {0}")]
    SyntheticSpec(String),

    #[error("no renderer registered for attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("prompt config: {0}")]
    PromptConfig(String),

    #[error("empty report text")]
    EmptyReport,

    #[error("llm client failed for study `{study}` after {attempts} attempt(s): {message}")]
    Client {
        study: String,
        attempts: usize,
        message: String,
    },

    #[error("extraction cache: {0}")]
    Cache(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("dictionary: {0}")]
    Dictionary(String),

    #[error("embedding provider failed on text `{text}`: {message}")]
    Provider { text: String, message: String },

    #[error("zero vector in cosine similarity")]
    ZeroVector,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("study `{0}` has no structured labels")]
    NoLabels(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<crate::model::Checkpoint>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("stratification: {0}")]
    Stratification(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
