//! Config-driven experiments: seeded runs and sweeps with persisted
//! artifacts, the flexibility table, the single-neuron study and SVG plots.

pub mod config;
pub mod neuron;
pub mod plot;
pub mod runner;
pub mod sweep;

use std::io::Write;

use rayon::prelude::*;

use crate::activations::{flexibility_score, ActivationKind, ActivationSpec, FLEX_DOMAIN, FLEX_SAMPLES};
use crate::error::{Error, Result};

pub use config::{ExperimentConfig, SweepConfig, SweepOverride};
pub use neuron::{single_neuron_study, NeuronRecord};
pub use plot::{plot_run, SliceSpec};
pub use runner::{reevaluate_run, run_experiment, RunReport, RunStatus};
pub use sweep::{run_sweep, SweepOutcome};

/// Maps `f` over `items` on a pool of `jobs` threads (0 = rayon's default),
/// keeping input order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Activations listed in the flexibility table, in row order.
pub fn flexibility_rows() -> Vec<ActivationSpec> {
    let mut rows = vec![
        ActivationSpec::plain(ActivationKind::Lu),
        ActivationSpec::plain(ActivationKind::Tanh),
        ActivationSpec::plain(ActivationKind::Relu),
        ActivationSpec::plain(ActivationKind::Elu),
        ActivationSpec::leaky_relu(0.2),
        ActivationSpec::plain(ActivationKind::Silu),
        ActivationSpec::plain(ActivationKind::Softplus),
    ];
    rows.extend([0.2, 0.3, 0.4, 0.6].map(ActivationSpec::lelu));
    rows
}

/// `activation,param,eta,min_slope,max_slope` for [`flexibility_rows`].
pub fn flexibility_table<W: Write>(writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["activation", "param", "eta", "min_slope", "max_slope"])?;
    for spec in flexibility_rows() {
        let score = flexibility_score(&spec, FLEX_DOMAIN, FLEX_SAMPLES);
        let param = if spec.kind.is_parametric() { spec.param.to_string() } else { String::new() };
        w.write_record([
            spec.kind.name().to_string(),
            param,
            score.eta.to_string(),
            score.min_slope.to_string(),
            score.max_slope.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flexibility_table_rows() {
        let mut buf = Vec::new();
        flexibility_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 11);
        let eta = |name: &str, param: &str| -> f64 {
            rows.iter().find(|r| r[0] == name && r[1] == param).unwrap()[2].parse().unwrap()
        };
        assert_eq!(eta("lu", ""), 0.0);
        assert_eq!(eta("softplus", ""), 1.0);
        assert_eq!(eta("leaky_relu", "0.2"), 0.8);
        assert_eq!(eta("lelu", "0.6"), 0.4);
        assert!((eta("silu", "") - 1.1).abs() < 0.01);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = parallel_map(&items, 3, |x| x * 2).unwrap();
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
