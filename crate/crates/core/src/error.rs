use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diff(#[from] diffcore::DiffError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("split too small: {0}")]
    SplitTooSmall(String),

    #[error("feature coverage failed after {attempts} attempts: {reason}")]
    Coverage { attempts: usize, reason: String },

    #[error("representation mismatch: agents expect {expected}, got {actual}")]
    ReprMismatch { expected: String, actual: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("training diverged at episode {episode}: loss is {loss}")]
    Divergence { episode: usize, loss: f64 },

    #[error("{op}: {value} is out of range (limit {limit})")]
    OutOfRange {
        op: &'static str,
        value: usize,
        limit: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
