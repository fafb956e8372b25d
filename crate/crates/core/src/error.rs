use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("column not resolvable: {0}")]
    Column(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unexpected end of data")]
    UnexpectedEof,

    #[error("value out of range: {0}")]
    ValueOutOfRange(String),

    #[error("transport solver: {0}")]
    Solver(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
