//! Command implementations behind the `calib` binary.
//!
//! Exit codes: 0 on success, 1 for bad input (files, configuration, frames),
//! 2 when the numerics fail (degenerate geometry, no consensus, rejected
//! boards).

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: calib_core::Error,
    },
    #[error(transparent)]
    Core(#[from] calib_core::Error),
    #[error("configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let numerical = match self {
            CliError::Stage { source, .. } | CliError::Core(source) => source.is_numerical(),
            CliError::Config(_) => false,
        };
        if numerical {
            2
        } else {
            1
        }
    }
}
