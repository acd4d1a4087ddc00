use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate segment from {0}: constant signal")]
    DegenerateSegment(String),

    #[error("duplicate record id `{0}` in manifest")]
    DuplicateId(String),

    #[error("unknown record id `{0}`")]
    UnknownId(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: size {size} bytes is not a multiple of 4", .path.display())]
    BadSampleFileSize { path: PathBuf, size: u64 },

    #[error("{}:{line}: not a number: `{text}`", .path.display())]
    NonNumericLine {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("both classes must be present")]
    SingleClass,

    #[error("requested rank {requested} exceeds achievable rank {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("backward called on a node that is not part of a recorded forward graph")]
    NoForwardGraph,

    #[error("no relevance rule for layer `{0}`")]
    UnsupportedLayer(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
