//! Batch front-end: config parsing, subcommand dispatch and report output.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{build_bounds, build_manifold, run, Command, Target};
pub use config::{ConfigError, RunConfig};
pub use report::{is_summary_line, write_atomic, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("missing input file {0}")]
    MissingInput(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Compute(String),
}

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Reads and parses a config file; a missing file is a usage error.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(RunConfig::parse(&text)?)
}
