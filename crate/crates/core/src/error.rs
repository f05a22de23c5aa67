use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("parse: row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("integrity: {0}")]
    Integrity(String),

    #[error("argument: {0}")]
    InvalidArgument(String),

    #[error("index: cell index {index} out of range for {len} cells")]
    CellIndex { index: usize, len: usize },

    #[error("sentence: unknown token `{0}`")]
    UnknownToken(String),

    #[error("sentence: duplicate token `{0}`")]
    DuplicateToken(String),

    #[error("sentence: non-finite expression for `{protein}` in cell `{cell_id}`")]
    NonFinite { cell_id: String, protein: String },

    #[error("split: stratum `{stratum}` has {size} units but {splits} splits are requested")]
    SmallStratum {
        stratum: String,
        size: usize,
        splits: usize,
    },

    #[error("label: unknown label `{0}`")]
    UnknownLabel(String),

    #[error("template: {0}")]
    Template(String),

    #[error("corpus: line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn { .. } | Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Integrity(_) => "integrity",
            Error::InvalidArgument(_) => "argument",
            Error::CellIndex { .. } => "index",
            Error::UnknownToken(_) | Error::DuplicateToken(_) | Error::NonFinite { .. } => {
                "sentence"
            }
            Error::SmallStratum { .. } => "split",
            Error::UnknownLabel(_) => "label",
            Error::Template(_) => "template",
            Error::MalformedRecord { .. } => "corpus",
            Error::Empty(_) => "empty",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
