use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Calibration file is malformed or incomplete.
    #[error("ingest error: {0}")]
    Ingest(String),

    /// Angle grid violates uniformity, ordering or range.
    #[error("grid error: {0}")]
    Grid(String),

    #[error("invalid argument: {0}")]
    Arg(String),

    /// Sector plan cannot tile the field of view or leaves a sector empty.
    #[error("sector plan error: {0}")]
    Plan(String),

    #[error("singular system: {0}")]
    Singularity(String),

    /// Angle outside the model's field of view.
    #[error("angle {0} deg outside the field of view [-90, 90]")]
    Domain(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Shapes of model and data do not agree.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
