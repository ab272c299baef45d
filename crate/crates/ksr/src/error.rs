use std::io;
use std::path::{Path, PathBuf};

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    /// Prefixes the message with a file name.
    pub fn in_file(self, path: &Path) -> CliError {
        let p = path.display();
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{p}: {m}")),
            CliError::Validation(m) => CliError::Validation(format!("{p}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{p}: {m}")),
            e @ CliError::Io { .. } => e,
        }
    }
}

impl From<ksr_core::Error> for CliError {
    fn from(e: ksr_core::Error) -> Self {
        use ksr_core::Error as E;
        match e {
            E::Unsupported(_) | E::NonFiniteLoss { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
