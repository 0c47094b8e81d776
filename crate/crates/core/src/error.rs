use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the regression lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("invalid network spec: {0}")]
    InvalidNetwork(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid training config: {0}")]
    InvalidTraining(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("nonpositive value {value} at grid node {index:?}")]
    NonPositive { index: Vec<usize>, value: f64 },

    #[error("every interior node was flagged by nonpositive predictions")]
    AllNodesFlagged,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("incomplete lattice: missing node {index:?}")]
    MissingNode { index: Vec<usize> },

    #[error("duplicate lattice node {index:?}")]
    DuplicateNode { index: Vec<usize> },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 2,
            Error::Io(_) | Error::Csv(_) | Error::MissingArtifact(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
