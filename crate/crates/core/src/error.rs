use std::io;

use thiserror::Error;

use crate::month::YearMonth;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{asset}: no observations in {month}")]
    MonthGap { asset: String, month: YearMonth },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("duplicate case ({asset}, {month})")]
    Integrity { asset: String, month: YearMonth },

    #[error("no cases precede {month}")]
    EmptyCaseBase { month: YearMonth },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("retrieval returned no scorable neighbours")]
    EmptyRetrieval,

    #[error("unknown case ({asset}, {month})")]
    UnknownCase { asset: String, month: YearMonth },

    #[error("case base format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("case base record {record}: {message} (last valid record: {last_valid})")]
    Load {
        record: usize,
        last_valid: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 usage/config, 2 data, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Invariant(_) => 3,
            _ => 2,
        }
    }
}
