//! Experiment orchestration for cwdmd: configuration, the LTI and Lorenz
//! pipelines, the property suite and file output.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod output;

use config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] cwdmd::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 1 for configuration and output-path problems, 2
    /// for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}
