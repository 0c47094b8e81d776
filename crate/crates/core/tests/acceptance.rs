//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. Criterion numbers given
//! as arguments (`-- 4 8`) restrict the run. The long full-protocol check only
//! runs with `LELU_FULL_PROTOCOL=1`.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use lelu_core::activations::{flexibility_score, ActivationKind, ActivationSpec, FLEX_DOMAIN, FLEX_SAMPLES};
use lelu_core::datasets::{gen_exp, DatasetSpec};
use lelu_core::diffusion::{
    staggered_sensor_1d, staggered_sensor_nd, true_sensor_1d, true_sensor_nd, FnPredictor, StructuredGrid,
};
use lelu_core::experiments::neuron::{default_activations, single_neuron_study, INTERPOLATION_TOL};
use lelu_core::experiments::runner::{median, CHECKPOINT_FILE, HISTORY_FILE, REPORT_FILE};
use lelu_core::experiments::{run_experiment, ExperimentConfig, RunReport, RunStatus};
use lelu_core::optim::Regularization;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn c1_flexibility() -> Verdict {
    let started = Instant::now();
    let eta = |spec: ActivationSpec| flexibility_score(&spec, FLEX_DOMAIN, FLEX_SAMPLES).eta;
    let mut bad = Vec::new();
    for (kind, expected) in [
        (ActivationKind::Lu, 0.0),
        (ActivationKind::Tanh, 1.0),
        (ActivationKind::Relu, 1.0),
        (ActivationKind::Elu, 1.0),
        (ActivationKind::Softplus, 1.0),
    ] {
        if eta(ActivationSpec::plain(kind)) != expected {
            bad.push(kind.to_string());
        }
    }
    for p in [0.2, 0.3, 0.4, 0.6] {
        if eta(ActivationSpec::leaky_relu(p)) != 1.0 - p {
            bad.push(format!("leaky_relu({p})"));
        }
        if eta(ActivationSpec::lelu(p)) != 1.0 - p {
            bad.push(format!("lelu({p})"));
        }
    }
    let silu = eta(ActivationSpec::plain(ActivationKind::Silu));
    if (silu - 1.1).abs() > 0.01 {
        bad.push(format!("silu={silu}"));
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(bad.is_empty() && secs < 1.0, format!("silu eta={silu:.4}, mismatches {bad:?}, {secs:.3}s"))
}

fn c2_lelu_smoothness() -> Verdict {
    let eps = f64::EPSILON;
    let mut worst_jump: f64 = 0.0;
    let mut worst_slope_jump: f64 = 0.0;
    let mut out_of_band = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for beta in [0.2, 0.3, 0.4, 0.6] {
        let phi = ActivationSpec::lelu(beta);
        let tiny = f64::MIN_POSITIVE;
        for x in [-tiny, -0.0, 0.0, tiny] {
            worst_jump = worst_jump.max(phi.eval(x).abs());
            worst_slope_jump = worst_slope_jump.max((phi.derivative(x) - 1.0).abs());
        }
        // One-sided limits of the branch formulas at 0.
        worst_slope_jump = worst_slope_jump.max(((1.0 - beta) * 0f64.exp() + beta - 1.0).abs());
        for _ in 0..250_000 {
            let x: f64 = rng.random_range(-50.0..50.0);
            let d = phi.derivative(x);
            if !(beta..=1.0).contains(&d) {
                out_of_band += 1;
            }
        }
    }
    verdict(
        worst_jump <= eps && worst_slope_jump <= eps && out_of_band == 0,
        format!("value jump {worst_jump:e}, slope jump {worst_slope_jump:e}, {out_of_band}/1000000 slopes outside [β, 1]"),
    )
}

fn c3_gradients() -> Verdict {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut cases: Vec<(ActivationKind, bool)> = ActivationKind::ALL.iter().map(|&k| (k, false)).collect();
    cases.push((ActivationKind::Lelu, true));
    for (i, (kind, trainable)) in cases.into_iter().enumerate() {
        let r = common::gradient_check(kind, trainable, 20, 1000 + i as u64);
        worst = worst.max(r.max_rel_err);
        compared += r.compared;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst < 1e-6 && secs < 30.0,
        format!("{compared} partials on 180 networks, max rel err {worst:e}, {secs:.2}s"),
    )
}

fn grid_1d(values: &[f64]) -> StructuredGrid {
    StructuredGrid::new(vec![(0..values.len()).map(|i| i as f64).collect()], values.to_vec()).unwrap()
}

fn grid_3d(n: usize, f: impl Fn(f64, f64, f64) -> f64) -> StructuredGrid {
    let axis: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut values = Vec::new();
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                values.push(f(a, b, c));
            }
        }
    }
    StructuredGrid::new(vec![axis.clone(), axis.clone(), axis], values).unwrap()
}

fn c4_diffusion_sensors() -> Verdict {
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut notes = Vec::new();
    let mut ok = true;

    let affine_1d = |x: f64| 2.0 + 0.7 * x;
    let g1 = grid_1d(&(0..9).map(|i| affine_1d(i as f64)).collect::<Vec<_>>());
    let p1 = FnPredictor(|x: &[f64]| affine_1d(x[0]));
    let affine_3d = |a: f64, b: f64, c: f64| 5.0 + 0.3 * a - 0.2 * b + 0.1 * c;
    let g3 = grid_3d(5, affine_3d);
    let p3 = FnPredictor(|x: &[f64]| affine_3d(x[0], x[1], x[2]));
    let zero = [
        max_abs(&true_sensor_1d(&g1).unwrap()),
        max_abs(&staggered_sensor_1d(&g1, &p1).unwrap().values),
        max_abs(&true_sensor_nd(&g3).unwrap()),
        max_abs(&staggered_sensor_nd(&g3, &p3).unwrap().values),
    ];
    ok &= zero.iter().all(|&z| z <= 1e-12);
    notes.push(format!("affine max {:e}", zero.iter().fold(0.0f64, |m, &z| m.max(z))));

    let bump = true_sensor_1d(&grid_1d(&[1.0, 2.0, 1.0])).unwrap()[0];
    let spike = grid_3d(3, |a, b, c| if (a, b, c) == (1.0, 1.0, 1.0) { 2.0 } else { 1.0 });
    let spike = true_sensor_nd(&spike).unwrap()[0];
    ok &= (bump - 1.0 / 3.0).abs() <= 1e-12 && (spike - 4.0 / 3.0).abs() <= 1e-12;
    notes.push(format!("[1,2,1]={bump}, spike={spike}"));

    let wavy: Vec<f64> = (0..11).map(|i| 2.0 + (0.9 * i as f64).sin()).collect();
    let gw = grid_1d(&wavy);
    let pw = FnPredictor(|x: &[f64]| 2.0 + (0.9 * x[0]).sin() + 0.1 * (3.0 * x[0]).cos());
    let t1 = true_sensor_1d(&gw).unwrap();
    let tn = true_sensor_nd(&gw).unwrap();
    let s1 = staggered_sensor_1d(&gw, &pw).unwrap().values;
    let sn = staggered_sensor_nd(&gw, &pw).unwrap().values;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let agree = bits(&t1) == bits(&tn) && bits(&s1) == bits(&sn);
    ok &= agree;
    notes.push(format!("1D/nd bitwise {agree}"));

    let c = 3.7;
    let scaled = gw.with_values(wavy.iter().map(|v| c * v).collect()).unwrap();
    let ps = FnPredictor(|x: &[f64]| c * (2.0 + (0.9 * x[0]).sin() + 0.1 * (3.0 * x[0]).cos()));
    let ts = true_sensor_1d(&scaled).unwrap();
    let ss = staggered_sensor_1d(&scaled, &ps).unwrap().values;
    let drift = t1.iter().zip(&ts).chain(s1.iter().zip(&ss)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ok &= drift <= 1e-12;
    notes.push(format!("scale drift {drift:e}"));
    verdict(ok, notes.join(", "))
}

struct Arm {
    mae: f64,
    mse: f64,
    flagged: Vec<usize>,
    per_seed: Vec<f64>,
}

fn run_arm(config: &ExperimentConfig) -> Arm {
    let reports = run_experiment(config, 0).expect("experiment failed");
    let ok: Vec<&RunReport> = reports.iter().filter(|r| r.status == RunStatus::Ok).collect();
    Arm {
        mae: median(ok.iter().filter_map(|r| r.final_mae)).unwrap_or(f64::NAN),
        mse: median(ok.iter().filter_map(|r| r.diffusion_mse)).unwrap_or(f64::NAN),
        flagged: reports.iter().map(|r| r.flagged_nodes.unwrap_or(0)).collect(),
        per_seed: reports.iter().map(|r| r.diffusion_mse.unwrap_or(f64::NAN)).collect(),
    }
}

fn describe(name: &str, arm: &Arm) -> String {
    let seeds: Vec<String> = arm.per_seed.iter().map(|v| format!("{v:.2e}")).collect();
    format!(
        "{name}: median mse {:.3e} [{}] mae {:.2e} flagged {:?}",
        arm.mse,
        seeds.join(" "),
        arm.mae,
        arm.flagged
    )
}

fn trend(dir: &Path, dataset: DatasetSpec, full_epochs: usize, min_lr: f64, good: ActivationSpec, baseline: ActivationSpec) -> Verdict {
    let config = |act| common::scaled_protocol(dataset.clone(), 7, 120, act, 5000, full_epochs, min_lr, dir);
    let g = run_arm(&config(good));
    let b = run_arm(&config(baseline));
    let ratio = b.mse / g.mse;
    verdict(
        g.mse < b.mse && ratio >= 3.0,
        format!("{}; {}; ratio {ratio:.2}", describe(&good.label(), &g), describe(&baseline.label(), &b)),
    )
}

fn c5_tanh_trend(dir: &Path) -> Verdict {
    trend(dir, DatasetSpec::tanh(7), 15000, 1e-6, ActivationSpec::lelu(0.3), ActivationSpec::plain(ActivationKind::Relu))
}

fn c6_exp_trend(dir: &Path) -> Verdict {
    trend(dir, DatasetSpec::exp(12), 20000, 2e-7, ActivationSpec::lelu(0.4), ActivationSpec::plain(ActivationKind::Tanh))
}

fn c7_full_protocol(dir: &Path) -> Verdict {
    if std::env::var("LELU_FULL_PROTOCOL").as_deref() != Ok("1") {
        return Verdict::Skip("set LELU_FULL_PROTOCOL=1 to run (8x240, 15000 epochs)".into());
    }
    let mut config = common::scaled_protocol(DatasetSpec::tanh(14), 8, 240, ActivationSpec::lelu(0.3), 15000, 15000, 1e-6, dir);
    config.seeds = Some(vec![1]);
    let r = &run_experiment(&config, 1).expect("experiment failed")[0];
    let (mae, mse) = (r.final_mae.unwrap_or(f64::NAN), r.diffusion_mse.unwrap_or(f64::NAN));
    verdict(
        mae < 1e-4 && mse < 5e-2,
        format!("mae {mae:.3e}, diffusion mse {mse:.3e}, flagged {:?}, {:.0}s", r.flagged_nodes, r.wall_time_s),
    )
}

fn c8_single_neuron() -> Verdict {
    let records = single_neuron_study(&gen_exp(3).unwrap(), &default_activations()).unwrap();
    let get = |label: &str| records.iter().find(|r| r.activation == label).unwrap();
    let interpolated = records.iter().all(|r| r.outer_residuals.iter().all(|v| v.abs() < INTERPOLATION_TOL));
    let lelu = get("lelu(0.4)");
    let weak: Vec<String> = ["relu", "elu", "silu", "softplus"]
        .iter()
        .map(|l| format!("{l} {:.1e}", get(l).gradient_norm))
        .collect();
    let weaker = ["relu", "elu", "silu", "softplus"].iter().all(|l| get(l).gradient_norm < lelu.gradient_norm);
    let elu = get("elu");
    verdict(
        interpolated && weaker && lelu.condition_number < elu.condition_number,
        format!(
            "|grad| {} vs lelu(0.4) {:.2e}; cond lelu {:.2e} vs elu {:.2e}",
            weak.join(", "),
            lelu.gradient_norm,
            lelu.condition_number,
            elu.condition_number
        ),
    )
}

fn c9_regularization(dir: &Path) -> Verdict {
    let silu = ActivationSpec::plain(ActivationKind::Silu);
    let plain = common::scaled_protocol(DatasetSpec::tanh(7), 7, 120, silu, 15000, 15000, 1e-6, &dir.join("plain"));
    let mut l1 = common::scaled_protocol(DatasetSpec::tanh(7), 7, 120, silu, 15000, 15000, 1e-6, &dir.join("l1"));
    l1.training.regularization = Regularization::l1(1e-4);
    let p = run_arm(&plain);
    let r = run_arm(&l1);
    let ratio = r.mae / p.mae;
    verdict(
        ratio >= 3.0 && r.mse <= p.mse,
        format!(
            "median mae {:.3e} -> {:.3e} (x{ratio:.2}), median diffusion mse {:.3e} -> {:.3e}",
            p.mae, r.mae, p.mse, r.mse
        ),
    )
}

fn c10_determinism(dir: &Path) -> Verdict {
    let mut config = common::scaled_protocol(
        DatasetSpec::tanh(7),
        3,
        16,
        ActivationSpec::new(ActivationKind::Lelu, 0.3, true).unwrap(),
        300,
        15000,
        1e-6,
        &dir.join("a"),
    );
    config.training.regularization = Regularization::l1(1e-4);
    let first = run_experiment(&config, 1).unwrap();
    config.output_dir = dir.join("b");
    let second = run_experiment(&config, 3).unwrap();
    let mut differing = Vec::new();
    for (x, y) in first.iter().zip(&second) {
        if x.outcome() != y.outcome() {
            differing.push(format!("seed {} report", x.seed));
        }
        for f in [HISTORY_FILE, CHECKPOINT_FILE, REPORT_FILE] {
            if fs::read(x.run_dir.join(f)).unwrap() != fs::read(y.run_dir.join(f)).unwrap() {
                differing.push(format!("seed {} {f}", x.seed));
            }
        }
    }
    verdict(differing.is_empty(), format!("{} runs compared, differing: {differing:?}", first.len()))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scratch = tempfile::tempdir().unwrap();
    let dir = |n: usize| scratch.path().join(format!("c{n}"));
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "flexibility table", Box::new(c1_flexibility)),
        (2, "LELU smoothness", Box::new(c2_lelu_smoothness)),
        (3, "gradient correctness", Box::new(c3_gradients)),
        (4, "diffusion sensors", Box::new(c4_diffusion_sensors)),
        (5, "tanh trend LELU(0.3) vs ReLU", Box::new(move || c5_tanh_trend(&dir(5)))),
        (6, "exp trend LELU(0.4) vs tanh", Box::new(move || c6_exp_trend(&dir(6)))),
        (7, "full protocol LELU(0.3) 8x240", Box::new(move || c7_full_protocol(&dir(7)))),
        (8, "single-neuron study", Box::new(c8_single_neuron)),
        (9, "L1 regularisation trade-off", Box::new(move || c9_regularization(&dir(9)))),
        (10, "determinism", Box::new(move || c10_determinism(&dir(10)))),
    ];
    let mut failures = 0;
    for (n, name, check) in &criteria {
        if !selected.is_empty() && !selected.contains(n) {
            continue;
        }
        let started = Instant::now();
        let v = check();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {n:>2} {name} ({secs:.1}s): {detail}");
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
