use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::config::{ExperimentConfig, SweepConfig};
use super::plot::{self, Figure, Series};
use super::runner::{run_dir_for, run_replicate, RunReport, RunStatus};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SCATTER_MAE_SVG: &str = "scatter_mae.svg";
pub const SCATTER_DIFFUSION_SVG: &str = "scatter_diffusion.svg";

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Reports sorted by size index (then label and seed).
    pub reports: Vec<RunReport>,
    pub summary: PathBuf,
}

/// Runs every cell × seed of `sweep`. A failing run is recorded with its
/// error and never stops the others.
pub fn run_sweep(sweep: &SweepConfig, jobs: usize) -> Result<SweepOutcome> {
    sweep.validate()?;
    let jobs_list: Vec<(ExperimentConfig, u64)> = sweep
        .cells()
        .into_iter()
        .flat_map(|cell| {
            let seeds = cell.seeds().unwrap_or_default();
            seeds.into_iter().map(move |s| (cell.clone(), s))
        })
        .collect();
    let mut reports = super::parallel_map(&jobs_list, jobs, |(cell, seed)| {
        run_replicate(cell, *seed).unwrap_or_else(|e| RunReport::failed(cell, *seed, run_dir_for(cell, *seed), &e))
    })?;
    sort_by_size(&mut reports);

    let out = &sweep.template.output_dir;
    fs::create_dir_all(out)?;
    let summary = out.join(SUMMARY_FILE);
    write_summary(&reports, BufWriter::new(File::create(&summary)?))?;
    write_scatter(&reports, BufWriter::new(File::create(out.join(SCATTER_FILE))?))?;
    let points: Vec<ScatterPoint> = reports.iter().filter(|r| r.status == RunStatus::Ok).map(ScatterPoint::from).collect();
    write_scatter_svgs(&points, out)?;
    Ok(SweepOutcome { reports, summary })
}

pub fn sort_by_size(reports: &mut [RunReport]) {
    reports.sort_by(|a, b| {
        a.size_index
            .total_cmp(&b.size_index)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.seed.cmp(&b.seed))
    });
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:e}"))
}

/// One row per run, in the order given.
pub fn write_summary<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "label", "depth", "width", "activation", "seed", "size_index", "status", "final_mae", "diffusion_mse",
        "flagged_nodes", "epochs", "wall_time_s", "synthetic", "error",
    ])?;
    for r in reports {
        w.write_record([
            r.label.clone(),
            r.depth.to_string(),
            r.width.to_string(),
            r.activation.clone(),
            r.seed.to_string(),
            format!("{:e}", r.size_index),
            r.status.as_str().into(),
            fmt_opt(r.final_mae),
            fmt_opt(r.diffusion_mse),
            r.flagged_nodes.map_or_else(String::new, |n| n.to_string()),
            r.epochs.to_string(),
            format!("{:.3}", r.wall_time_s),
            r.synthetic.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Size index against both metrics for the successful runs.
pub fn write_scatter<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["activation", "size_index", "final_mae", "diffusion_mse"])?;
    for r in reports.iter().filter(|r| r.status == RunStatus::Ok) {
        w.write_record([
            r.activation.clone(),
            format!("{:e}", r.size_index),
            fmt_opt(r.final_mae),
            fmt_opt(r.diffusion_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One successful run as drawn in the sweep scatter plots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub activation: String,
    pub size_index: f64,
    pub final_mae: Option<f64>,
    pub diffusion_mse: Option<f64>,
}

impl From<&RunReport> for ScatterPoint {
    fn from(r: &RunReport) -> Self {
        ScatterPoint {
            activation: r.activation.clone(),
            size_index: r.size_index,
            final_mae: r.final_mae,
            diffusion_mse: r.diffusion_mse,
        }
    }
}

/// Writes the MAE and diffusion scatter plots, one series per activation.
pub fn write_scatter_svgs(points: &[ScatterPoint], out: &Path) -> Result<Vec<PathBuf>> {
    let mut activations: Vec<&str> = points.iter().map(|p| p.activation.as_str()).collect();
    activations.sort_unstable();
    activations.dedup();

    let figure = |title: &str, y_label: &str, metric: fn(&ScatterPoint) -> Option<f64>| {
        let mut fig = Figure::new(title, "size index m^n / 1e12", y_label).log_x().log_y();
        for act in &activations {
            let series = points
                .iter()
                .filter(|p| p.activation == *act)
                .filter_map(|p| metric(p).map(|m| (p.size_index, m)))
                .collect();
            fig.push(Series::markers(act, series));
        }
        fig
    };
    let mae = figure("Training MAE", "MAE", |p| p.final_mae);
    let diffusion = figure("Diffusion MSE", "diffusion MSE", |p| p.diffusion_mse);
    let paths = vec![out.join(SCATTER_MAE_SVG), out.join(SCATTER_DIFFUSION_SVG)];
    plot::save(&mae, &paths[0])?;
    plot::save(&diffusion, &paths[1])?;
    Ok(paths)
}
