use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] spcrit::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Rejected(String),

    #[error("{0} acceptance check(s) failed")]
    Acceptance(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 runtime error, 2 invalid model, input or non-critical model,
    /// 3 failed acceptance.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(spcrit::Error::InvalidArgument(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
            CliError::Input(_) | CliError::Rejected(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}
