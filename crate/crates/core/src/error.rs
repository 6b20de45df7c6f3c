use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("adapter unavailable: {0}")]
    AdapterUnavailable(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("subword vocabulary missing: {0}")]
    VocabularyMissing(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("sequence too short: need at least {min} residues, got {actual}")]
    SequenceTooShort { min: usize, actual: usize },

    #[error("pocket extraction produced no residues")]
    EmptyPocket,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("kind error: {0}")]
    Kind(String),

    #[error("arity error: {0}")]
    Arity(String),

    #[error("unknown encoder `{0}`")]
    UnknownEncoder(String),

    #[error("unknown interaction `{0}`")]
    UnknownInteraction(String),

    #[error("model graph contains a cycle through node {0}")]
    Cycle(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("metric requires both classes to be present")]
    SingleClass,

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot sample {requested} negatives: only {available} unseen pairs exist")]
    InsufficientUniverse { requested: usize, available: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Yaml(#[from] serde_yaml::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::UnknownEncoder(_)
            | Error::UnknownInteraction(_)
            | Error::UnknownMetric(_)
            | Error::Yaml(_)
            | Error::Json(_) => 2,
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::Csv(_)
            | Error::Io { .. }
            | Error::EmptyDataset
            | Error::EmptySequence
            | Error::SequenceTooShort { .. }
            | Error::InsufficientUniverse { .. }
            | Error::VocabularyMissing(_) => 3,
            _ => 4,
        }
    }
}
