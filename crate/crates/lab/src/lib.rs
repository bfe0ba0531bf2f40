//! Experiment drivers, file formats and reports on top of `packetlab-core`.
//!
//! - [`config`]: flat `key = value` experiment configuration
//! - [`envelope_file`]: two-column envelope initial data
//! - [`experiments`]: per-ε scaling studies and their pass/fail verdicts
//! - [`props`]: seeded property suite
//! - [`report`]: scaling reports, CSV and JSON output
//! - [`simulate`]: a single logged run from the ansatz initial data

use std::path::{Path, PathBuf};

pub mod config;
pub mod envelope_file;
pub mod experiments;
pub mod props;
pub mod report;
pub mod simulate;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] packetlab_core::Error),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("envelope line {line}: {msg}")]
    Envelope { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
