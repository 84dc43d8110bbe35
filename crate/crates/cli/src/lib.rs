//! Batch driver for the `nofdm` simulator: TOML configuration, sweeps,
//! CSV reports and SVG plots.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: nofdm_core::Error) -> Self {
        use nofdm_core::Error as E;
        match e.root() {
            E::Config(_) | E::Allocation(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    /// Process exit status: 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
