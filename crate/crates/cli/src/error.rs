use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("verification failed: {0} mismatches")]
    Mismatch(usize),

    #[error(transparent)]
    Core(#[from] pbgnet::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Mismatch(_) => 3,
            CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(e) if e.is_data() => 2,
            CliError::Core(pbgnet::Error::DimensionMismatch { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}
