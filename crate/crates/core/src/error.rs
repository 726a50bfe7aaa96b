use std::path::PathBuf;

use crate::grid::CubeCount;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a non-empty point set")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite coordinate at point {point}, dimension {dim}")]
    NonFinite { point: usize, dim: usize },

    #[error("duplicate point id {0}")]
    DuplicateId(u64),

    #[error("requested {requested} partitions but the dataset has only {points} points")]
    TooManyPartitions { requested: usize, points: usize },

    #[error("need {needed} distinct locations for seeding but the points occupy only {distinct}")]
    TooFewDistinct { needed: usize, distinct: usize },

    #[error("{}: {source}", .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("grid refused: M = {cubes} cubes {}", refusal_reason(.cubes, *.cap))]
    GridRefused { cubes: CubeCount, cap: u64 },

    #[error("point is outside the grid bounds in dimension {dim}")]
    OutOfBounds { dim: usize },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: byte offset {offset}: {message}")]
    Binary {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("cannot render {dims}-dimensional data; rendering is 2-D only")]
    NotTwoDimensional { dims: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches a file path to a bare I/O error.
    pub fn at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn refusal_reason(cubes: &CubeCount, cap: u64) -> String {
    match cubes.value {
        None => format!("overflows a 64-bit count (cap is {cap})"),
        Some(_) => format!("exceeds the cap of {cap}"),
    }
}
