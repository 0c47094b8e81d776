use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{self, DatasetKind, RegressionDataset};
use crate::diffusion::{diffusion_mse, StructuredGrid};
use crate::error::{Error, Result};
use crate::network::{Checkpoint, Network};
use crate::optim::{self, LossKind};

use super::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const DIFFUSION_FILE: &str = "diffusion.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const REPLICATES_FILE: &str = "replicates.csv";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed => "failed",
        }
    }
}

/// Outcome of one seeded run. Metrics are `None` when the run did not get
/// far enough to produce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub seed: u64,
    pub status: RunStatus,
    pub depth: usize,
    pub width: usize,
    pub activation: String,
    /// `width^depth / 1e12`.
    pub size_index: f64,
    /// True for the synthetic motor surrogate.
    pub synthetic: bool,
    pub final_mae: Option<f64>,
    pub diffusion_mse: Option<f64>,
    pub flagged_nodes: Option<usize>,
    pub epochs: usize,
    pub final_learning_rate: Option<f64>,
    /// History file, relative to the run directory.
    pub history: Option<String>,
    /// Kept out of `report.json` (see [`TIMING_FILE`]) so that reproduced
    /// runs write identical reports.
    #[serde(skip)]
    pub wall_time_s: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub run_dir: PathBuf,
}

impl RunReport {
    /// Copy without wall time and run location, the parts that legitimately
    /// differ between reproductions of the same run.
    pub fn outcome(&self) -> RunReport {
        RunReport { wall_time_s: 0.0, run_dir: PathBuf::new(), ..self.clone() }
    }

    fn pending(config: &ExperimentConfig, seed: u64, run_dir: PathBuf) -> RunReport {
        let net = &config.network;
        RunReport {
            label: config.label(),
            seed,
            status: RunStatus::Failed,
            depth: net.depth,
            width: net.width,
            activation: net.activation.label(),
            size_index: size_index(net.depth, net.width),
            synthetic: config.dataset.kind == DatasetKind::MotorSurrogate,
            final_mae: None,
            diffusion_mse: None,
            flagged_nodes: None,
            epochs: 0,
            final_learning_rate: None,
            history: None,
            wall_time_s: 0.0,
            error: None,
            run_dir,
        }
    }

    /// Report for a run that could not be executed at all.
    pub fn failed(config: &ExperimentConfig, seed: u64, run_dir: PathBuf, err: &Error) -> RunReport {
        RunReport { error: Some(err.to_string()), ..RunReport::pending(config, seed, run_dir) }
    }

    pub fn load(run_dir: impl AsRef<Path>) -> Result<RunReport> {
        let run_dir = run_dir.as_ref();
        let mut report: RunReport = serde_json::from_reader(open_artifact(&run_dir.join(REPORT_FILE))?)?;
        report.run_dir = run_dir.to_path_buf();
        let timing = run_dir.join(TIMING_FILE);
        if timing.exists() {
            let t: Timing = serde_json::from_reader(open_artifact(&timing)?)?;
            report.wall_time_s = t.wall_time_s;
        }
        Ok(report)
    }

    fn persist(&self) -> Result<()> {
        write_json(&self.run_dir.join(REPORT_FILE), self)?;
        write_json(&self.run_dir.join(TIMING_FILE), &Timing { wall_time_s: self.wall_time_s })
    }
}

#[derive(Serialize, Deserialize)]
struct Timing {
    wall_time_s: f64,
}

/// Model size index `m^n / 1e12` for width `m` and depth `n`.
pub fn size_index(depth: usize, width: usize) -> f64 {
    (width as f64).powi(depth as i32) / 1e12
}

pub fn run_dir_for(config: &ExperimentConfig, seed: u64) -> PathBuf {
    config.output_dir.join(config.slug()).join(format!("seed-{seed}"))
}

/// Runs every replicate of `config` (up to `jobs` at a time, 0 = one per
/// core) and writes the per-run artifacts plus a replicate table.
///
/// Divergence is recorded in the affected report; other failures abort.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<RunReport>> {
    config.validate()?;
    let seeds = config.seeds()?;
    let reports = super::parallel_map(&seeds, jobs, |&seed| run_replicate(config, seed))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let table = config.output_dir.join(config.slug()).join(REPLICATES_FILE);
    write_replicate_table(&reports, File::create(table)?)?;
    Ok(reports)
}

/// One seeded replicate, persisted under [`run_dir_for`].
pub fn run_replicate(config: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let run_dir = run_dir_for(config, seed);
    fs::create_dir_all(&run_dir)?;
    let started = Instant::now();
    let mut single = config.clone();
    single.replicates = None;
    single.seeds = Some(vec![seed]);
    single.training.seed = seed;
    write_json(&run_dir.join(CONFIG_FILE), &single)?;

    let mut report = RunReport::pending(config, seed, run_dir.clone());
    let data = single.dataset.prepare()?;
    check_input_dim(&single, &data)?;
    datasets::write_csv(&data.grid, File::create(run_dir.join(TRAINING_FILE))?)?;

    let (inputs, targets) = data.training_pairs();
    let mut net = Network::init_he_normal(single.network, seed)?;
    match optim::fit(&mut net, &inputs, &targets, &single.training) {
        Ok(history) => {
            optim::write_history(&history, BufWriter::new(File::create(run_dir.join(HISTORY_FILE))?))?;
            report.history = Some(HISTORY_FILE.into());
            report.epochs = history.len();
            report.final_learning_rate = history.last().map(|r| r.learning_rate);
        }
        Err(Error::Divergence { epoch, loss }) => {
            report.status = RunStatus::Diverged;
            report.epochs = epoch;
            report.error = Some(Error::Divergence { epoch, loss }.to_string());
            report.wall_time_s = started.elapsed().as_secs_f64();
            report.persist()?;
            return Ok(report);
        }
        Err(e) => return Err(e),
    }
    write_json(&run_dir.join(CHECKPOINT_FILE), &net.to_checkpoint())?;
    write_predictions(&net, &data, single.dense_eval_points, &run_dir.join(PREDICTIONS_FILE))?;

    report.final_mae = Some(optim::evaluate(&net, LossKind::Mae, &inputs, &targets)?);
    match diffusion_mse(&data.grid, &net) {
        Ok(d) => {
            d.write_csv(BufWriter::new(File::create(run_dir.join(DIFFUSION_FILE))?))?;
            report.diffusion_mse = Some(d.mse);
            report.flagged_nodes = Some(d.flagged_nodes);
            report.status = RunStatus::Ok;
        }
        Err(e @ Error::AllNodesFlagged) => {
            report.flagged_nodes = Some(data.grid.interior_nodes().len());
            report.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    report.persist()?;
    Ok(report)
}

fn check_input_dim(config: &ExperimentConfig, data: &RegressionDataset) -> Result<()> {
    if config.network.input_dim != data.grid.dim() {
        return Err(Error::Config(format!(
            "network input_dim {} does not match {}-dimensional dataset",
            config.network.input_dim,
            data.grid.dim()
        )));
    }
    Ok(())
}

/// Metrics recomputed from a run directory's persisted artifacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reevaluation {
    pub final_mae: f64,
    pub diffusion_mse: f64,
    pub flagged_nodes: usize,
}

/// Rebuilds the dataset from `config.json`, reloads `checkpoint.json` and
/// recomputes the training MAE and diffusion MSE.
pub fn reevaluate_run(run_dir: impl AsRef<Path>) -> Result<Reevaluation> {
    let run_dir = run_dir.as_ref();
    let config: ExperimentConfig = serde_json::from_reader(open_artifact(&run_dir.join(CONFIG_FILE))?)?;
    let net = load_checkpoint(run_dir.join(CHECKPOINT_FILE))?;
    let data = config.dataset.prepare()?;
    let (inputs, targets) = data.training_pairs();
    let final_mae = optim::evaluate(&net, LossKind::Mae, &inputs, &targets)?;
    let d = diffusion_mse(&data.grid, &net)?;
    Ok(Reevaluation { final_mae, diffusion_mse: d.mse, flagged_nodes: d.flagged_nodes })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let ckpt: Checkpoint = serde_json::from_reader(open_artifact(path.as_ref())?)?;
    Network::from_checkpoint(&ckpt)
}

pub(crate) fn open_artifact(path: &Path) -> Result<std::io::BufReader<File>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    Ok(std::io::BufReader::new(File::open(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Dense prediction grid for plotting: `points` samples between the first
/// and last node in 1D, the lattice refined by two in every axis otherwise.
pub fn dense_points(grid: &StructuredGrid, points: usize) -> Vec<Vec<f64>> {
    if grid.dim() == 1 {
        let axis = &grid.axes()[0];
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        let step = (hi - lo) / (points - 1) as f64;
        return (0..points).map(|i| vec![lo + i as f64 * step]).collect();
    }
    let fine: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|a| {
            let h = (a[1] - a[0]) / 2.0;
            (0..2 * a.len() - 1).map(|i| a[0] + i as f64 * h).collect()
        })
        .collect();
    let shape: Vec<usize> = fine.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; shape.len()];
            for d in (0..shape.len()).rev() {
                p[d] = fine[d][flat % shape[d]];
                flat /= shape[d];
            }
            p
        })
        .collect()
}

fn write_predictions(net: &Network, data: &RegressionDataset, points: usize, path: &Path) -> Result<()> {
    let xs = dense_points(&data.grid, points);
    let ys = net.predict_batch(&xs)?;
    let dim = data.grid.dim();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = (1..=dim).map(|d| format!("x{d}")).collect();
    header.push("prediction".into());
    header.extend((1..=dim).map(|d| format!("x{d}_raw")));
    header.push("prediction_raw".into());
    w.write_record(&header)?;
    let norm = &data.normalization;
    for (x, &y) in xs.iter().zip(&ys) {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        row.push(format!("{y:.16e}"));
        row.extend(norm.inverse_input(x).iter().map(|v| format!("{v:.16e}")));
        row.push(format!("{:.16e}", norm.inverse_target(y)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:e}"))
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Per-seed rows followed by a `median` row over the successful runs.
pub fn write_replicate_table<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "seed", "status", "final_mae", "diffusion_mse", "flagged_nodes", "epochs", "wall_time_s"])?;
    for r in reports {
        w.write_record([
            r.label.clone(),
            r.seed.to_string(),
            r.status.as_str().into(),
            fmt_opt(r.final_mae),
            fmt_opt(r.diffusion_mse),
            r.flagged_nodes.map_or_else(String::new, |n| n.to_string()),
            r.epochs.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])?;
    }
    let ok: Vec<&RunReport> = reports.iter().filter(|r| r.status == RunStatus::Ok).collect();
    if let Some(first) = reports.first() {
        w.write_record([
            first.label.clone(),
            "median".into(),
            format!("{}/{} ok", ok.len(), reports.len()),
            fmt_opt(median(ok.iter().filter_map(|r| r.final_mae))),
            fmt_opt(median(ok.iter().filter_map(|r| r.diffusion_mse))),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
