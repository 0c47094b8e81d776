use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationKind, ActivationSpec};
use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::optim::TrainConfig;

pub const DEFAULT_DENSE_POINTS: usize = 401;

/// One experiment: a dataset, an architecture, a training protocol and the
/// seeds to replicate it with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub network: NetworkSpec,
    pub training: TrainConfig,
    /// Number of replicates; seeds default to `training.seed + i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Explicit seed list, overrides `training.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_dense_points")]
    pub dense_eval_points: usize,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_dense_points() -> usize {
    DEFAULT_DENSE_POINTS
}

impl ExperimentConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.training.validate()?;
        if self.dense_eval_points < 2 {
            return Err(Error::Config("dense_eval_points must be >= 2".into()));
        }
        self.seeds().map(|_| ())
    }

    /// Replicate seeds, in run order.
    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds = match (&self.seeds, self.replicates) {
            (Some(s), Some(n)) if s.len() != n => {
                return Err(Error::Config(format!("{} seeds given for {n} replicates", s.len())))
            }
            (Some(s), _) => s.clone(),
            (None, n) => {
                let n = n.unwrap_or(1) as u64;
                (0..n).map(|i| self.training.seed.wrapping_add(i)).collect()
            }
        };
        if seeds.is_empty() {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        let distinct: HashSet<u64> = seeds.iter().copied().collect();
        if distinct.len() != seeds.len() {
            return Err(Error::Config(format!("replicate seeds must be distinct, got {seeds:?}")));
        }
        Ok(seeds)
    }

    /// Run label, defaulting to activation and architecture.
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!("{}_d{}_w{}", self.network.activation.label(), self.network.depth, self.network.width)
        })
    }

    /// Directory name derived from [`Self::label`].
    pub fn slug(&self) -> String {
        slugify(&self.label())
    }
}

pub(crate) fn slugify(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '_' | '-' => out.push(c),
            '(' | ',' | ' ' | '=' => out.push('-'),
            _ => {}
        }
    }
    out.trim_end_matches('-').to_string()
}

/// Per-cell exception to the sweep template. `None` fields match anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOverride {
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub activation: Option<ActivationKind>,
    #[serde(default)]
    pub lr_initial: Option<f64>,
}

impl SweepOverride {
    fn matches(&self, depth: usize, width: usize, activation: &ActivationSpec) -> bool {
        self.depth.is_none_or(|d| d == depth)
            && self.width.is_none_or(|w| w == width)
            && self.activation.is_none_or(|k| k == activation.kind)
    }
}

/// Cartesian sweep over depths × widths × activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub template: ExperimentConfig,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub activations: Vec<ActivationSpec>,
    #[serde(default)]
    pub overrides: Vec<SweepOverride>,
}

impl SweepConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sweep: SweepConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.widths.is_empty() || self.activations.is_empty() {
            return Err(Error::Config("sweep lists must be non-empty".into()));
        }
        for o in &self.overrides {
            if o.lr_initial.is_some_and(|lr| !(lr > 0.0)) {
                return Err(Error::Config(format!("invalid override learning rate {:?}", o.lr_initial)));
            }
        }
        self.cells().iter().try_for_each(ExperimentConfig::validate)
    }

    /// One experiment per grid cell, in depth, width, activation order.
    ///
    /// Later overrides win when several match a cell. The template's label is
    /// ignored so that every cell gets its own directory.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut cells = Vec::new();
        for &depth in &self.depths {
            for &width in &self.widths {
                for activation in &self.activations {
                    let mut cell = self.template.clone();
                    cell.label = None;
                    cell.network.depth = depth;
                    cell.network.width = width;
                    cell.network.activation = *activation;
                    for o in self.overrides.iter().filter(|o| o.matches(depth, width, activation)) {
                        if let Some(lr) = o.lr_initial {
                            cell.training.schedule.initial = lr;
                            cell.training.schedule.minimum = cell.training.schedule.minimum.min(lr);
                        }
                    }
                    cells.push(cell);
                }
            }
        }
        cells
    }
}
