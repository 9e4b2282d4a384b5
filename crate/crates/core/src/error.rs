use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("undefined frequency: {0}")]
    UndefinedFrequency(String),
    #[error("unresolved supremum: {0}")]
    UnresolvedSupremum(String),
    #[error("region outside field domain: {0}")]
    Domain(String),
    #[error("field not resolved by fit_order: {0}")]
    NotResolved(String),
    #[error("mixed eigenvalues: {0}")]
    MixedEigenvalues(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
