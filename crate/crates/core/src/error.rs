use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate level mask: {kept} kept level(s), at least 2 required")]
    DegenerateMask { kept: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("stratification error: class {class} has {count} sample(s), at least 2 required")]
    Stratification { class: usize, count: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("evaluation failed for chromosome {chromosome}: {source}")]
    Evaluation {
        chromosome: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no point within accuracy bound; closest point has accuracy {closest_accuracy:.4} at {closest_transistors} transistors")]
    NoPointWithinBound {
        closest_accuracy: f64,
        closest_transistors: u64,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
