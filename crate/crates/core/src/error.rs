use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file does not match its schema. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate row for ({date}, {stock_id}) at {path}:{line}")]
    DuplicateRow {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
        stock_id: String,
    },

    #[error("date misalignment: {0}")]
    DateMisalignment(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing embedding for trading day {0}")]
    MissingDay(NaiveDate),

    #[error("date {date} outside covered range {first}..={last}")]
    OutOfRange {
        date: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },

    #[error("date {0} is not a trading day of the calendar")]
    NotTradingDay(NaiveDate),

    #[error("degenerate norm: {0}")]
    DegenerateNorm(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("variant {variant} requires {what}")]
    MissingInput { variant: String, what: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("look-ahead: decision on {decision} queried data dated {queried}")]
    LookAhead {
        decision: NaiveDate,
        queried: NaiveDate,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}
