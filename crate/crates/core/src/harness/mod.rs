//! Experiments: datasets, runs, metrics on disk, and the command line.

pub mod cli;
mod config;
mod data;
mod experiment;

pub use config::{DatasetKind, ExperimentConfig, CONFIG_KEYS};
pub use data::{
    analytic_barycenter, draw_gaussians, gaussian_dataset, gen_truncated_gaussian, image_histogram, load_mnist,
    pixel_cost, unit_grid, Dataset, GaussianSpec,
};
pub use experiment::{
    build_dataset, oracle_check, read_manifest, run_experiment, ExperimentOutput, Manifest, MetricsRow, ObjectiveKind,
    OracleCheckReport, CSV_HEADER,
};

pub use crate::adom::consensus_metric;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adom::AdomError;
use crate::entot::EntotError;
use crate::netgraph::NetgraphError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    ConfigSyntax { path: String, line: usize, message: String },

    #[error("unknown config key '{0}'")]
    UnknownKey(String),

    #[error("invalid value '{value}' for {key}: {message}")]
    InvalidValue { key: String, value: String, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: at byte offset {offset}: {message}")]
    Format { path: PathBuf, offset: usize, message: String },

    #[error("only {found} images of digit {digit} found, {wanted} requested")]
    NotEnoughImages { digit: u8, found: usize, wanted: usize },

    #[error("solver failed after {rows_written} metric rows: {source}")]
    Solver { source: AdomError, rows_written: usize },

    #[error(transparent)]
    Network(#[from] NetgraphError),

    #[error(transparent)]
    Adom(#[from] AdomError),

    #[error(transparent)]
    Transport(#[from] EntotError),

    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn invalid(key: &str, value: impl std::fmt::Display, message: &str) -> Self {
        Self::InvalidValue { key: key.to_string(), value: value.to_string(), message: message.to_string() }
    }

    pub(crate) fn format(path: &Path, offset: usize, message: &str) -> Self {
        Self::Format { path: path.to_path_buf(), offset, message: message.to_string() }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
