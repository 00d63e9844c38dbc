use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] driftlab::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("manifest: {0}")]
    Manifest(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything wrong with the inputs, 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        use driftlab::Error as E;
        match self {
            CliError::Config(_) | CliError::Manifest(_) => 2,
            CliError::Core(
                E::Prohibited { .. }
                | E::RhoOutOfRange { .. }
                | E::InvalidParameter { .. }
                | E::TimeBeforeOrigin { .. }
                | E::MissingSecondMomentRatio
                | E::Empty(_),
            ) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
