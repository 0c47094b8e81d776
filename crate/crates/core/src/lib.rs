//! Nonlinear regression laboratory built around the parametric leaky
//! exponential linear unit (LELU).
//!
//! The crate is organised bottom-up:
//!
//! - [`activations`]: the activation family, its derivatives and the
//!   flexibility score `1 - min(φ')/max(φ')`
//! - [`network`]: dense feedforward networks with a linear single output,
//!   HeNormal initialisation and reverse-mode gradients
//! - [`optim`]: MAE/MSE losses, Adam, the plateau learning-rate schedule and
//!   the mini-batch training loop
//! - [`diffusion`]: Laplace-like diffusion sensors on structured grids and the
//!   staggered-mesh overfitting metric
//! - [`datasets`]: canonical 1D datasets, a synthetic 3D surrogate, grid
//!   normalisation and CSV I/O
//! - [`experiments`]: config-driven runs, sweeps, the single-neuron study,
//!   report and SVG emission

pub mod activations;
pub mod datasets;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod network;
pub mod optim;

pub use activations::{ActivationKind, ActivationSpec, FlexibilityScore};
pub use datasets::{DatasetKind, DatasetSpec, Normalization, RegressionDataset};
pub use diffusion::{DiffusionReport, Predictor, StructuredGrid};
pub use error::{Error, Result};
pub use network::{ForwardCache, GradientSet, Network, NetworkSpec};
pub use optim::{
    AdamState, EpochRecord, LossKind, LrSchedule, PlateauScheduler, Regularization,
    RegularizationKind, TrainConfig,
};
