use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A conditional covariance (or precision) could not be factorized even
    /// after the single jitter retry.
    #[error("numerical failure in {context}: matrix is not positive definite after jitter retry")]
    NotPositiveDefinite { context: String },

    #[error("empty trace: {0}")]
    EmptyTrace(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
