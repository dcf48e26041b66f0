//! Command-line workflows over the `imreg` library.

pub mod commands;
pub mod reproduce;
pub mod scenario;

use std::io;
use std::path::{Path, PathBuf};

use imreg::RegulatorError;
use thiserror::Error;

pub use scenario::Scenario;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Regulator(#[from] RegulatorError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    /// A check ran to completion and did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse(_) | Self::Usage(_) | Self::Io { .. } => EXIT_USAGE,
            Self::Failed(_) => EXIT_FAILED,
            Self::Regulator(e) => match e {
                RegulatorError::Overflow { .. } | RegulatorError::NotHurwitz(_) | RegulatorError::SingularSolve(_) => {
                    EXIT_NUMERICAL
                }
                _ => EXIT_USAGE,
            },
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
