use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Input rejected before any computation.
    #[error("invalid input at `{instance}` (covert.schema.json#{schema}): {message}")]
    Schema {
        instance: String,
        schema: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] covert_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for rejected input, 3 for failures after validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } | Self::Parse { .. } | Self::Usage(_) => 2,
            Self::Core(
                covert_core::Error::QuadratureNonConvergence { .. }
                | covert_core::Error::CharacteristicFunctionZero { .. }
                | covert_core::Error::Io(_),
            ) => 3,
            Self::Core(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
