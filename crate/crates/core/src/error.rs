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

    #[error("truncated NIfTI payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid label {value} at voxel ({x}, {y}, {z})")]
    InvalidLabel {
        value: i64,
        x: usize,
        y: usize,
        z: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("distance undefined: target set is empty")]
    UndefinedDistance,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("arity error: {0}")]
    Arity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no non-missing values for method `{method}`, metric `{metric}`")]
    AllMissing { method: String, metric: String },

    #[error("invalid table: {0}")]
    Table(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("could not place lesion {index} after {attempts} attempts")]
    Capacity { index: usize, attempts: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
