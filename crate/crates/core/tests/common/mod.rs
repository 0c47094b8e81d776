#![allow(dead_code)]

use std::path::Path;

use lelu_core::activations::{ActivationKind, ActivationSpec};
use lelu_core::datasets::DatasetSpec;
use lelu_core::experiments::ExperimentConfig;
use lelu_core::network::{Network, NetworkSpec};
use lelu_core::optim::{LossKind, LrSchedule, Regularization, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plateau protocol with patience and cooldown scaled by `epochs / full_epochs`,
/// so a shortened run still walks the whole learning-rate range.
pub fn scaled_protocol(
    dataset: DatasetSpec,
    depth: usize,
    width: usize,
    activation: ActivationSpec,
    epochs: usize,
    full_epochs: usize,
    min_lr: f64,
    out: &Path,
) -> ExperimentConfig {
    let ratio = epochs as f64 / full_epochs as f64;
    ExperimentConfig {
        dataset,
        network: NetworkSpec::new(1, depth, width, activation).unwrap(),
        training: TrainConfig {
            epochs,
            batch_size: 3,
            loss: LossKind::Mae,
            schedule: LrSchedule {
                initial: 1e-3,
                minimum: min_lr,
                factor: 0.5,
                patience: (500.0 * ratio).round() as usize,
                cooldown: (100.0 * ratio).round() as usize,
            },
            regularization: Regularization::none(),
            seed: 1,
        },
        replicates: None,
        seeds: Some(vec![1, 2, 3]),
        dense_eval_points: 401,
        output_dir: out.to_path_buf(),
        label: None,
    }
}

/// Relative error with a unit floor, so near-zero gradients are compared
/// absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub struct GradientCheck {
    pub networks: usize,
    pub max_rel_err: f64,
    pub compared: usize,
}

fn random_network(kind: ActivationKind, trainable: bool, rng: &mut ChaCha8Rng) -> Network {
    let param = if kind.is_parametric() { rng.random_range(0.05..0.9) } else { 0.0 };
    let activation = ActivationSpec::new(kind, param, trainable).unwrap();
    let spec = NetworkSpec::new(rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=8), activation).unwrap();
    let mut net = Network::init_he_normal(spec, rng.random()).unwrap();
    let slots = net.slots().to_vec();
    for slot in slots {
        for b in &mut net.params_mut()[slot.biases..slot.biases + slot.rows] {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    if trainable {
        for beta in net.activation_params_mut() {
            *beta = rng.random_range(0.05..0.9);
        }
    }
    net
}

/// Backward pass against central differences on `count` random networks.
/// Kinked activations redraw any sample with a pre-activation within `1e-4`
/// of the kink.
pub fn gradient_check(kind: ActivationKind, trainable: bool, count: usize, seed: u64) -> GradientCheck {
    const H: f64 = 1e-6;
    let kinked = matches!(kind, ActivationKind::Relu | ActivationKind::LeakyRelu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err: f64 = 0.0;
    let mut compared = 0;
    let mut networks = 0;
    while networks < count {
        let mut net = random_network(kind, trainable, &mut rng);
        let x: Vec<f64> = (0..net.spec().input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, cache) = net.forward(&x).unwrap();
        if kinked && cache.pre_activations.iter().flatten().any(|z| z.abs() < 1e-4) {
            continue;
        }
        networks += 1;
        let analytic = net.backward(&cache, 1.0).unwrap().values;
        let mask = net.trainable_mask();
        for i in 0..net.num_params() {
            if !mask[i] {
                continue;
            }
            let p0 = net.params()[i];
            net.params_mut()[i] = p0 + H;
            let up = net.predict(&x).unwrap();
            net.params_mut()[i] = p0 - H;
            let down = net.predict(&x).unwrap();
            net.params_mut()[i] = p0;
            let numeric = (up - down) / (2.0 * H);
            max_rel_err = max_rel_err.max(rel_err(analytic[i], numeric));
            compared += 1;
        }
    }
    GradientCheck { networks, max_rel_err, compared }
}
