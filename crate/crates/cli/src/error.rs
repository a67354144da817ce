use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] vocoscope::Error),
}

impl CliError {
    /// 1 for bad input or flags, 2 for I/O and numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}
