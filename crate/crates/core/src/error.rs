use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("bandwidth {value} out of range: {reason}")]
    Bandwidth { value: f64, reason: String },

    #[error("design is not equally spaced (x_i = i/n); use the general-domain estimator")]
    NotEquallySpaced,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A numerical precondition of a formula does not hold.
    #[error("numeric precondition failed: {0}")]
    Precondition(String),

    #[error("invalid noise moments: {0}")]
    Moments(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn bandwidth(value: f64, reason: impl Into<String>) -> Self {
        Error::Bandwidth {
            value,
            reason: reason.into(),
        }
    }
}
