//! Library side of the `diffunif` command-line tool: case-count ingestion,
//! configuration, output formatting and the subcommands themselves.

pub mod app;
pub mod config;
pub mod ingest;
pub mod output;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Model(#[from] diffunif::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use diffunif::Error as E;
        match self {
            CliError::Model(E::NumericalFailure { .. } | E::NoConvergence { .. } | E::ZeroLikelihood) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
