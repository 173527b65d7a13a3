use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("field `{0}` is not indexed")]
    FieldNotIndexed(&'static str),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("training data contains only one class{}", .fold.map(|f| format!(" (fold {f})")).unwrap_or_default())]
    SingleClass { fold: Option<usize> },

    #[error("non-finite feature value in pair {0}")]
    NonFinite(String),

    #[error("feature schema mismatch: model expects `{expected}`, got `{found}`")]
    SchemaMismatch { expected: String, found: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
