use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid value {value:?} at row {row}, column {column:?}")]
    BadCell { row: usize, column: String, value: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column {column:?} has zero variance{}", group.as_ref().map(|g| format!(" in group {g:?}")).unwrap_or_default())]
    ZeroVariance { column: String, group: Option<String> },

    #[error("column {column:?} needs a log transform but contains a nonpositive value")]
    NonPositiveLog { column: String },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical failure in {block}: {detail}")]
    Numerical { block: &'static str, detail: String },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("phase scan grid point {index} (eta = {eta}): {source}")]
    GridPoint {
        index: usize,
        eta: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn numerical(block: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { block, detail: detail.into() }
    }
}
