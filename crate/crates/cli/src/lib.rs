//! Command-line pipeline: each subcommand is one stage writing into a
//! per-run directory with a hashed manifest.

pub mod config;
pub mod run;
pub mod stages;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input {path}; run `{producer}` first")]
    Dependency { path: String, producer: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    /// 2 for configuration and missing upstream stages, 1 for data and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Dependency { .. } => 2,
            CliError::Data(_) | CliError::Io { .. } => 1,
        }
    }
}
