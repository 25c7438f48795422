use std::path::PathBuf;

use crate::config::ConfigError;

/// Runtime failures; every variant exits with status 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Simulation(#[from] ifmsim_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{file}, line {line}: {message}")]
    Table {
        file: String,
        line: u64,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("cannot write output: {0}")]
    Output(String),
}
