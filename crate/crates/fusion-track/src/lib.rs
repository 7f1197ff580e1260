//! Std companion to `fusion-track-core`: JSON scenario documents, CSV export,
//! parallel sweeps and the `fusion-track` command line.

pub mod cli;
pub mod config;
pub mod export;
pub mod parallel;

use std::io;

use fusion_track_core::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] fusion_track_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Core(e.into())
    }
}

impl AppError {
    /// 1 for bad inputs or unusable paths, 2 for failures during simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if !e.is_config() => 2,
            AppError::Pool(_) => 2,
            _ => 1,
        }
    }
}
