use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] lorenz_shadow::Error),
}

impl CliError {
    /// `2` for anything the user can fix in the invocation or config,
    /// `1` for failures of the experiment itself.
    pub fn exit_code(&self) -> u8 {
        use lorenz_shadow::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::Config(_) | E::CaseMismatch { .. } | E::InvalidParams(_) | E::NoValidGamma(_)) => 2,
            CliError::Csv(_) | CliError::Core(_) => 1,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
