use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid JSON document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{column}`: unknown categorical value `{value}`")]
    UnknownCategory { column: String, value: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {required} rows, got {found}")]
    TooFewRows { required: usize, found: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("centroid of an empty row set")]
    EmptyCentroid,

    #[error("model has no clusters")]
    EmptyModel,

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("row {0} is not covered by the oracle")]
    MissingLabel(usize),

    #[error("row {row} already taught as category {existing}, oracle now says {given}")]
    OracleConflict {
        row: usize,
        existing: usize,
        given: usize,
    },

    #[error("row {0} was never queried")]
    NotQueried(usize),

    #[error("no rows left to query")]
    PoolExhausted,

    #[error("dataset `{0}` is not available")]
    DatasetUnavailable(String),
}
