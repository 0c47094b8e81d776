use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lelu_core::datasets::{self, DatasetKind, DatasetSpec, Points};
use lelu_core::diffusion::diffusion_mse;
use lelu_core::experiments::{
    self, neuron, plot_run, run_experiment, run_sweep, ExperimentConfig, RunStatus, SliceSpec, SweepConfig,
};
use lelu_core::experiments::runner::{load_checkpoint, median};
use lelu_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lelu-lab", version, about = "Regression experiments with parametric LELU activations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a raw (unnormalised) dataset as CSV.
    Generate {
        #[arg(long, value_parser = parse_kind)]
        dataset: DatasetKind,
        /// A count for 1D datasets or `n1,n2,n3` for the motor surrogate.
        #[arg(long)]
        points: String,
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every replicate of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Concurrent runs (0 = one per core).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train every cell of a sweep config and write the summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Diffusion sensors of a checkpoint on a grid used as-is (e.g. a run's
    /// normalised training.csv).
    Diffusion {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flexibility score of every tabulated activation.
    FlexTable {
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-neuron gradient and Hessian study on a 3-point CSV.
    NeuronStudy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG plots of a run or sweep directory.
    Plot {
        #[arg(long)]
        run: PathBuf,
        /// Fixed coordinates such as `x2=7,x3=2`; repeat for several slices.
        #[arg(long = "slice")]
        slices: Vec<SliceSpec>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> std::result::Result<DatasetKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown dataset {s:?} (tanh, exp, exp_shifted, motor_surrogate, csv)")
    })
}

fn parse_points(s: &str) -> Result<Points> {
    let counts = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("bad point count {s:?}")))?;
    Ok(match counts.as_slice() {
        [n] => Points::Count(*n),
        _ => Points::Shape(counts),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { dataset, points, shift, out } => {
            let spec = DatasetSpec {
                kind: dataset,
                points: Some(parse_points(&points)?),
                shift,
                path: None,
                power_exponent: None,
                keep_offset: false,
            };
            let data = spec.generate()?;
            datasets::save_csv(&data, &out)?;
            println!("wrote {} nodes to {}", data.grid.len(), out.display());
        }
        Command::Train { config, jobs } => {
            let config = ExperimentConfig::from_path(config)?;
            let reports = run_experiment(&config, jobs)?;
            for r in &reports {
                println!(
                    "{} seed {}: {} mae={} diffusion_mse={} flagged={} ({:.1}s)",
                    r.label,
                    r.seed,
                    r.status.as_str(),
                    fmt_metric(r.final_mae),
                    fmt_metric(r.diffusion_mse),
                    r.flagged_nodes.map_or("-".into(), |n| n.to_string()),
                    r.wall_time_s
                );
            }
            if reports.len() > 1 {
                let ok = || reports.iter().filter(|r| r.status == RunStatus::Ok);
                println!(
                    "median over {} ok runs: mae={} diffusion_mse={}",
                    ok().count(),
                    fmt_metric(median(ok().filter_map(|r| r.final_mae))),
                    fmt_metric(median(ok().filter_map(|r| r.diffusion_mse)))
                );
            }
            if let Some(r) = reports.iter().find(|r| r.status == RunStatus::Diverged) {
                eprintln!("error: {}", r.error.as_deref().unwrap_or("training diverged"));
                return Err(Error::Divergence { epoch: r.epochs, loss: f64::NAN });
            }
        }
        Command::Sweep { config, jobs } => {
            let sweep = SweepConfig::from_path(config)?;
            let outcome = run_sweep(&sweep, jobs)?;
            let failed = outcome.reports.iter().filter(|r| r.status != RunStatus::Ok).count();
            println!(
                "{} runs ({} not ok), summary in {}",
                outcome.reports.len(),
                failed,
                outcome.summary.display()
            );
        }
        Command::Diffusion { checkpoint, dataset, out } => {
            let net = load_checkpoint(checkpoint)?;
            let data = datasets::load_csv(dataset)?;
            let report = diffusion_mse(&data.grid, &net)?;
            report.write_csv(BufWriter::new(File::create(&out)?))?;
            println!("diffusion_mse={:e} flagged_nodes={}", report.mse, report.flagged_nodes);
        }
        Command::FlexTable { out } => {
            experiments::flexibility_table(BufWriter::new(File::create(&out)?))?;
            println!("wrote {}", out.display());
        }
        Command::NeuronStudy { dataset, out } => {
            let data = datasets::load_csv(dataset)?;
            let records = neuron::single_neuron_study(&data, &neuron::default_activations())?;
            neuron::write_study_csv(&records, BufWriter::new(File::create(&out)?))?;
            for r in &records {
                println!(
                    "{:<16} middle_error={:+.4e} |grad|={:.4e}{} cond={:.4e}",
                    r.activation,
                    r.middle_error,
                    r.gradient_norm,
                    if r.vanishing { " (vanishing)" } else { "" },
                    r.condition_number
                );
            }
        }
        Command::Plot { run, slices, out } => {
            for path in plot_run(&run, &slices, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4e}"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, Error::Divergence { .. }) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
