//! Losses, Adam, the plateau learning-rate schedule and the training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
}

impl LossKind {
    /// Per-sample loss and its derivative with respect to the prediction.
    #[inline]
    fn sample(self, prediction: f64, target: f64) -> (f64, f64) {
        let r = prediction - target;
        match self {
            LossKind::Mae => {
                let g = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (r.abs(), g)
            }
            LossKind::Mse => (r * r, 2.0 * r),
        }
    }
}

/// Mean loss over the batch and the per-sample upstream gradients `∂loss/∂ŷ_i`.
pub fn loss_and_grad(kind: LossKind, predictions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "loss needs equal non-empty lists, got {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = predictions.len() as f64;
    let mut total = 0.0;
    let grads = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let (l, g) = kind.sample(p, t);
            total += l;
            g / n
        })
        .collect();
    Ok((total / n, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationKind {
    #[default]
    None,
    L1,
    L2,
}

/// Weight penalty. Only the gradient is affected; reported losses stay pure.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Regularization {
    pub kind: RegularizationKind,
    #[serde(default)]
    pub strength: f64,
}

impl Regularization {
    pub fn none() -> Self {
        Regularization::default()
    }

    pub fn l1(strength: f64) -> Self {
        Regularization { kind: RegularizationKind::L1, strength }
    }

    pub fn l2(strength: f64) -> Self {
        Regularization { kind: RegularizationKind::L2, strength }
    }

    pub fn validate(&self) -> Result<()> {
        let none = self.kind == RegularizationKind::None;
        if !(self.strength.is_finite() && self.strength >= 0.0) || none != (self.strength == 0.0) {
            return Err(Error::InvalidTraining(format!(
                "regularization strength {} invalid for {:?}",
                self.strength, self.kind
            )));
        }
        Ok(())
    }

    /// Adds the penalty gradient for every masked weight.
    pub fn add_gradient(&self, params: &[f64], weight_mask: &[bool], grad: &mut [f64]) {
        let lambda = self.strength;
        match self.kind {
            RegularizationKind::None => {}
            RegularizationKind::L1 => {
                for ((g, &w), &m) in grad.iter_mut().zip(params).zip(weight_mask) {
                    if m && w != 0.0 {
                        *g += lambda * w.signum();
                    }
                }
            }
            RegularizationKind::L2 => {
                for ((g, &w), &m) in grad.iter_mut().zip(params).zip(weight_mask) {
                    if m {
                        *g += 2.0 * lambda * w;
                    }
                }
            }
        }
    }
}

/// Plateau schedule settings (`lr` block of the experiment config).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    #[serde(rename = "min")]
    pub minimum: f64,
    pub factor: f64,
    pub patience: usize,
    pub cooldown: usize,
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial > 0.0
            && self.minimum > 0.0
            && self.minimum <= self.initial
            && self.factor > 0.0
            && self.factor < 1.0;
        if !ok {
            return Err(Error::InvalidTraining(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }
}

/// Reduce-on-plateau state machine, updated once per epoch.
///
/// Any strictly lower loss counts as an improvement. After `patience`
/// epochs without improvement the rate is multiplied by `factor` (floored at
/// `minimum`) and the patience counter stays frozen for `cooldown` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    schedule: LrSchedule,
    rate: f64,
    best: f64,
    wait: usize,
    cooldown_left: usize,
}

impl PlateauScheduler {
    pub fn new(schedule: LrSchedule) -> Self {
        PlateauScheduler {
            schedule,
            rate: schedule.initial,
            best: f64::INFINITY,
            wait: 0,
            cooldown_left: 0,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Feeds one epoch loss and returns the rate for the next epoch.
    pub fn update(&mut self, epoch_loss: f64) -> f64 {
        let in_cooldown = self.cooldown_left > 0;
        if in_cooldown {
            self.cooldown_left -= 1;
            self.wait = 0;
        }
        if epoch_loss < self.best {
            self.best = epoch_loss;
            self.wait = 0;
        } else if !in_cooldown {
            self.wait += 1;
            if self.wait >= self.schedule.patience {
                if self.rate > self.schedule.minimum {
                    self.rate = (self.rate * self.schedule.factor).max(self.schedule.minimum);
                    self.cooldown_left = self.schedule.cooldown;
                }
                self.wait = 0;
            }
        }
        self.rate
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }

    /// One update of `params` in place. Entries with `mask[i] == false` are
    /// left untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], mask: Option<&[bool]>, lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() || mask.is_some_and(|m| m.len() != self.m.len()) {
            return Err(Error::ShapeMismatch(format!(
                "adam state has {} entries, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            let g = grads[i];
            self.m[i] = flush_subnormal(b1 * self.m[i] + (1.0 - b1) * g);
            self.v[i] = flush_subnormal(b2 * self.v[i] + (1.0 - b2) * g * g);
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Moments of dead units decay geometrically into the subnormal range, where
/// arithmetic is orders of magnitude slower.
#[inline]
fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    #[serde(rename = "lr")]
    pub schedule: LrSchedule,
    #[serde(default)]
    pub regularization: Regularization,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidTraining("epochs and batch_size must be >= 1".into()));
        }
        self.schedule.validate()?;
        self.regularization.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches (no penalty term).
    pub loss: f64,
    /// Rate used during this epoch.
    pub learning_rate: f64,
    /// Per-layer activation parameters at the end of the epoch, when trainable.
    pub beta: Option<Vec<f64>>,
}

/// Mini-batch training of `net` in place.
///
/// Each epoch shuffles the sample order with a generator seeded from
/// `config.seed`, applies one Adam step per batch (the last batch may be
/// short) and then feeds the epoch's mean loss to the plateau schedule.
pub fn fit(net: &mut Network, inputs: &[Vec<f64>], targets: &[f64], config: &TrainConfig) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidTraining(format!(
            "need matching non-empty data, got {} inputs and {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(net.num_params());
    let mut scheduler = PlateauScheduler::new(config.schedule);
    let weight_mask = net.weight_mask();
    let trainable = net.trainable_mask();
    let record_beta = net.spec().activation.trainable;

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grad = vec![0.0; net.num_params()];
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = scheduler.rate();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            let n = batch.len() as f64;
            for &i in batch {
                let (y, cache) = net.forward(&inputs[i])?;
                let (l, g) = config.loss.sample(y, targets[i]);
                loss_sum += l;
                net.accumulate_gradient(&cache, g / n, &mut grad)?;
            }
            config.regularization.add_gradient(net.params(), &weight_mask, &mut grad);
            adam.step(net.params_mut(), &grad, Some(&trainable), lr)?;
            net.clamp_activation_params();
        }
        let loss = loss_sum / inputs.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(EpochRecord {
            epoch,
            loss,
            learning_rate: lr,
            beta: record_beta.then(|| net.activation_params().to_vec()),
        });
        scheduler.update(loss);
    }
    Ok(history)
}

/// Mean loss of `net` over a dataset.
pub fn evaluate(net: &Network, kind: LossKind, inputs: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let predictions = net.predict_batch(inputs)?;
    Ok(loss_and_grad(kind, &predictions, targets)?.0)
}

/// Writes a history as CSV (`epoch,loss,learning_rate[,beta_0,…]`).
pub fn write_history<W: std::io::Write>(history: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let betas = history.first().and_then(|r| r.beta.as_ref()).map_or(0, Vec::len);
    let mut header = vec!["epoch".to_string(), "loss".into(), "learning_rate".into()];
    header.extend((0..betas).map(|l| format!("beta_{l}")));
    w.write_record(&header)?;
    for r in history {
        let mut row = vec![r.epoch.to_string(), format!("{:e}", r.loss), format!("{:e}", r.learning_rate)];
        if let Some(b) = &r.beta {
            row.extend(b.iter().map(|v| format!("{v:e}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
