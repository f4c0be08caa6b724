use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("variable {0:?} is constant across the population")]
    ConstantVariable(String),

    #[error("predictors are collinear")]
    Collinear,

    #[error("need more than {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("index contains no topics")]
    EmptyIndex,

    #[error("unknown topic {0}")]
    UnknownTopic(String),

    #[error("topic {0} is the residual group: its documents sit in clusters below the minimum size and have no profile")]
    ResidualTopic(String),

    #[error("stage {stage} failed: {inner}")]
    Stage { stage: String, inner: Box<Error> },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }

    /// True for failures caused by the user's inputs rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        if let Error::Stage { inner, .. } = self {
            return inner.is_input_error();
        }
        matches!(
            self,
            Error::Io { .. }
                | Error::Malformed { .. }
                | Error::DuplicateDocument(_)
                | Error::InvalidParameter(_)
                | Error::UnknownTopic(_)
                | Error::ResidualTopic(_)
        )
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::InvalidParameter(format!("config: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<bincode::Error> for Error {
    fn from(e: bincode::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
