use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 usage, 3 data or format, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Prefixes data errors with the file they came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

impl From<maskfusion::Error> for CliError {
    fn from(e: maskfusion::Error) -> Self {
        use maskfusion::Error as E;
        match e {
            E::Unsupported(_) => CliError::Usage(e.to_string()),
            E::TrainingDiverged(_) | E::Internal(_) => CliError::Numeric(e.to_string()),
            E::InvalidArgument(_) | E::Format { .. } => CliError::Data(e.to_string()),
        }
    }
}
