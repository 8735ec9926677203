use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: produced a NaN")]
    NonFinite { op: &'static str },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("metric unavailable: {0}")]
    MetricUnavailable(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
