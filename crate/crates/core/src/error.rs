use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema inference needs at least one training row")]
    SchemaEmpty,

    #[error("malformed cell at row {row}, column `{column}`: {value:?}")]
    MalformedCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite numeric value {0}")]
    NonFinite(f64),

    #[error("record {record_id} is malformed: {reason}")]
    MalformedRecord { record_id: String, reason: String },

    #[error("{0} encoded columns do not fit on a 16x16 canvas")]
    LayoutOverflow(usize),

    #[error("stale manifest: built for schema {found}, expected {expected}")]
    StaleManifest { expected: String, found: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("categorical group `{feature}` has {hot} active cells")]
    AmbiguousDecode { feature: String, hot: usize },

    #[error("degenerate task: {0}")]
    DegenerateTask(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_path(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Path { path, source }
    }
}
