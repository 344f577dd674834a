use std::io;

/// Malformed or unreadable files.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic number, expected {0}")]
    BadMagic(&'static str),
    #[error("file is truncated")]
    Truncated,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] fld_core::Error),
}

/// Command failure, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, config, manifest or input files (exit 2).
    #[error("{0}")]
    Usage(String),
    /// A computation ran but failed its check or did not converge (exit 1).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<fld_core::Error> for CliError {
    fn from(e: fld_core::Error) -> Self {
        match e {
            fld_core::Error::Diverged { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
