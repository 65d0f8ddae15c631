use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// A mapped column is absent from the input header, or the mapping itself is unusable.
    #[error("schema error: {0}")]
    Schema(String),

    /// A malformed data row, reported in strict mode. `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("invalid trajectory {id:?}: {message}")]
    Trajectory { id: String, message: String },

    #[error("duplicate trajectory id {0:?}")]
    DuplicateTrajectory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid geometry in feature {feature}: {message}")]
    Geometry { feature: String, message: String },

    #[error("duplicate area id {0:?}")]
    DuplicateArea(String),

    #[error("GeoJSON error: {0}")]
    GeoJson(String),

    #[error("staircase needs at least one defined score")]
    EmptyStaircase,

    #[error("reports were computed over different area sets ({0} vs {1})")]
    MismatchedAreaSets(String, String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
