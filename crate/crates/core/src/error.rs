use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported embedding: {0}")]
    UnsupportedEmbedding(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("access error: {0}")]
    Access(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("recovery error: {0}")]
    Recovery(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI error line and the
    /// C ABI error codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Argument(_) => "argument",
            Error::UnsupportedEmbedding(_) => "unsupported_embedding",
            Error::Training(_) => "training",
            Error::Metric(_) => "metric",
            Error::Access(_) => "access",
            Error::Oracle(_) => "oracle",
            Error::Recovery(_) => "recovery",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
