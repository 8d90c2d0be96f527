use qhd_core::QhdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Args(#[from] clap::Error),

    #[error(transparent)]
    Core(#[from] QhdError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for validation and I/O failures, 2 for numeric aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(QhdError::NumericAbort { .. }) => 2,
            _ => 1,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Io { context: what(), source })
    }
}
