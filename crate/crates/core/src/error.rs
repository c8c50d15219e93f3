use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid; `key` names the offending entry.
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid search space: {}", .0.join("; "))]
    Space(Vec<String>),

    #[error("invalid data in {source_name}: {message}")]
    Data { source_name: String, message: String },

    #[error("grid sampler exhausted")]
    Exhausted,

    #[error("objective `{0}` has no admissible queries")]
    NoAdmissibleQueries(String),

    #[error("train and meta splits share query ids: {0:?}")]
    SplitOverlap(Vec<String>),

    #[error("grid has {count} configurations, above the cap of {cap}")]
    GridTooLarge { count: u128, cap: u128 },

    #[error("batch element {position}: {source}")]
    Batch {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {index}: {source}")]
    Stage {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn data(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from invalid input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config { .. }
            | Error::Space(_)
            | Error::SplitOverlap(_)
            | Error::GridTooLarge { .. } => true,
            Error::Stage { source, .. } | Error::Batch { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
