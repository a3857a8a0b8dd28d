//! Batch front-end for `openrates`: JSON experiment configs in, CSV and JSON
//! artifacts out.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] openrates::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for config errors, 3 for numerical non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(openrates::Error::NoConvergence { .. }) => 3,
            _ => 1,
        }
    }
}
