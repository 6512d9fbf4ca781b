use std::io;
use std::path::PathBuf;

/// Failures of the experiment driver.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fbm_blowup_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    /// Outputs were written but a numerical check is out of tolerance.
    #[error("check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn config(detail: impl Into<String>) -> Self {
        HarnessError::Config(detail.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for configuration problems, 2 for numerical
    /// failures, 3 for exhausted resources and IO.
    pub fn exit_code(&self) -> u8 {
        use fbm_blowup_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Core(E::Config { .. }) => 1,
            HarnessError::Core(E::Resource { .. }) | HarnessError::Io { .. } | HarnessError::Csv(_) => 3,
            HarnessError::Core(_) | HarnessError::Check(_) => 2,
        }
    }
}
