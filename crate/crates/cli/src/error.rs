use thiserror::Error;

/// A failure tagged with the pipeline stage it happened in. The variant
/// decides the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("[{stage}] {message}")]
    Usage { stage: &'static str, message: String },
    #[error("[{stage}] {message}")]
    Data { stage: &'static str, message: String },
    #[error("[{stage}] {message}")]
    Numerical { stage: &'static str, message: String },
}

impl CliError {
    pub fn usage(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::Usage { stage, message: message.into() }
    }

    pub fn data(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::Data { stage, message: message.into() }
    }

    /// Classifies a library error: configuration problems are usage
    /// errors, data problems are data errors, everything else is numerical.
    pub fn from_core(stage: &'static str, e: ofmfa::Error) -> Self {
        let message = e.to_string();
        match e {
            ofmfa::Error::InvalidConfig(_) => CliError::Usage { stage, message },
            ofmfa::Error::InvalidData(_) => CliError::Data { stage, message },
            ofmfa::Error::NotPositiveDefinite { .. } | ofmfa::Error::EmptyTrace(_) => {
                CliError::Numerical { stage, message }
            }
        }
    }

    pub fn io(stage: &'static str, path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Data { stage, message: format!("{}: {e}", path.display()) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 1,
            CliError::Data { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
