//! Job runner, report encodings and acceptance suite on top of `cartan-core`.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod datasets;
pub mod jobs;
pub mod oracles;
pub mod report;
pub mod suite;

pub use config::{JobConfig, JobKind};
pub use jobs::run_job;
pub use report::{CheckRecord, ReportBundle};

/// Errors surfaced to the command line.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration; the message names the offending field.
    #[error("{0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] cartan_core::Error),
}
