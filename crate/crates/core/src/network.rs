//! Dense feedforward network with a linear single-neuron output.
//!
//! All parameters live in one flat buffer laid out layer by layer as
//! `[W_0, b_0, W_1, b_1, …, W_out, b_out, β_0 … β_{n−1}]`, with every weight
//! matrix stored row-major (`rows = fan_out`, `cols = fan_in`). Gradients and
//! optimizer moments share the same layout, so the optimizer can treat the
//! whole network as a single slice.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub depth: usize,
    pub width: usize,
    pub activation: ActivationSpec,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, depth: usize, width: usize, activation: ActivationSpec) -> Result<Self> {
        let spec = NetworkSpec { input_dim, depth, width, activation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.depth == 0 || self.width == 0 {
            return Err(Error::InvalidNetwork(format!(
                "input_dim, depth and width must be >= 1 (got {}, {}, {})",
                self.input_dim, self.depth, self.width
            )));
        }
        self.activation.validate()
    }
}

/// Position of one affine layer inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub rows: usize,
    pub cols: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSlot {
    fn end(&self) -> usize {
        self.biases + self.rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

/// Intermediate values recorded by [`Network::forward`].
///
/// Entry `l` holds the hidden layer `l` values; the last entry is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

/// Gradient of a scalar with respect to every network parameter, in the
/// network's flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: Vec<f64>,
}

/// Dot product with independent partial sums so the loop vectorises.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn build_slots(spec: &NetworkSpec) -> (Vec<LayerSlot>, usize) {
    let mut slots = Vec::with_capacity(spec.depth + 1);
    let mut offset = 0;
    let mut fan_in = spec.input_dim;
    for l in 0..=spec.depth {
        let rows = if l == spec.depth { 1 } else { spec.width };
        let slot = LayerSlot { rows, cols: fan_in, weights: offset, biases: offset + rows * fan_in };
        offset = slot.end();
        slots.push(slot);
        fan_in = rows;
    }
    (slots, offset + spec.depth)
}

impl Network {
    /// All-zero network.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let (slots, len) = build_slots(&spec);
        let mut net = Network { spec, slots, params: vec![0.0; len] };
        let beta = spec.activation.param;
        net.activation_params_mut().fill(beta);
        Ok(net)
    }

    /// HeNormal initialisation: untruncated `N(0, 2 / fan_in)` weights, zero
    /// biases. Deterministic in `seed`.
    pub fn init_he_normal(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Network::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in net.slots.clone() {
            let std = (2.0 / slot.cols as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive standard deviation");
            for w in &mut net.params[slot.weights..slot.biases] {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from a flat parameter buffer.
    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let (slots, len) = build_slots(&spec);
        if params.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} parameters, got {}",
                params.len()
            )));
        }
        Ok(Network { spec, slots, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn beta_offset(&self) -> usize {
        self.params.len() - self.spec.depth
    }

    /// Per-layer activation parameters.
    pub fn activation_params(&self) -> &[f64] {
        &self.params[self.beta_offset()..]
    }

    pub fn activation_params_mut(&mut self) -> &mut [f64] {
        let off = self.beta_offset();
        &mut self.params[off..]
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        let s = self.slots[layer];
        &self.params[s.weights..s.biases]
    }

    pub fn layer_biases(&self, layer: usize) -> &[f64] {
        let s = self.slots[layer];
        &self.params[s.biases..s.end()]
    }

    /// True for every entry of the flat buffer that is a weight (not a bias
    /// or an activation parameter).
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.params.len()];
        for s in &self.slots {
            mask[s.weights..s.biases].fill(true);
        }
        mask
    }

    /// Parameter indices updated by the optimizer.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.params.len()];
        if !self.spec.activation.trainable {
            let off = self.beta_offset();
            mask[off..].fill(false);
        }
        mask
    }

    /// Keeps trainable activation parameters inside `[0, 0.99]`.
    pub fn clamp_activation_params(&mut self) {
        if self.spec.activation.trainable {
            for b in self.activation_params_mut() {
                *b = b.clamp(0.0, 0.99);
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    fn affine(&self, slot: LayerSlot, input: &[f64], out: &mut Vec<f64>) {
        let w = &self.params[slot.weights..slot.biases];
        let b = &self.params[slot.biases..slot.end()];
        out.clear();
        out.extend(w.chunks_exact(slot.cols).zip(b).map(|(row, bias)| bias + dot(row, input)));
    }

    /// Prediction plus the intermediate values needed by [`Network::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        self.check_input(x)?;
        let depth = self.spec.depth;
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let betas = self.activation_params();
        for l in 0..=depth {
            let input: &[f64] = if l == 0 { x } else { &act[l - 1] };
            let mut z = Vec::with_capacity(self.slots[l].rows);
            self.affine(self.slots[l], input, &mut z);
            let a = if l == depth {
                z.clone()
            } else {
                let phi = self.spec.activation.with_param(betas[l]);
                z.iter().map(|&v| phi.eval(v)).collect()
            };
            pre.push(z);
            act.push(a);
        }
        let y = act[depth][0];
        Ok((y, ForwardCache { input: x.to_vec(), pre_activations: pre, activations: act }))
    }

    /// Prediction without retaining intermediate values.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let betas = self.activation_params();
        let mut cur = x.to_vec();
        let mut next = Vec::with_capacity(self.spec.width);
        for l in 0..self.spec.depth {
            self.affine(self.slots[l], &cur, &mut next);
            let phi = self.spec.activation.with_param(betas[l]);
            next.iter_mut().for_each(|v| *v = phi.eval(*v));
            std::mem::swap(&mut cur, &mut next);
        }
        self.affine(self.slots[self.spec.depth], &cur, &mut next);
        Ok(next[0])
    }

    pub fn predict_batch<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x.as_ref())).collect()
    }

    /// Gradient of `upstream · ŷ` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, upstream: f64) -> Result<GradientSet> {
        let mut values = vec![0.0; self.params.len()];
        self.accumulate_gradient(cache, upstream, &mut values)?;
        Ok(GradientSet { values })
    }

    /// Adds `upstream · ∂ŷ/∂θ` into `grad` (flat layout).
    pub fn accumulate_gradient(&self, cache: &ForwardCache, upstream: f64, grad: &mut [f64]) -> Result<()> {
        self.check_cache(cache)?;
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient buffer has {} entries, network has {}",
                grad.len(),
                self.params.len()
            )));
        }
        let depth = self.spec.depth;
        let beta_off = self.beta_offset();
        let trainable_beta = self.spec.activation.trainable;
        let betas = self.activation_params();

        // dL/dz for the current layer, starting at the linear output.
        let mut delta = vec![upstream];
        let mut upstream_act = Vec::with_capacity(self.spec.width);
        for l in (0..=depth).rev() {
            let slot = self.slots[l];
            let input: &[f64] = if l == 0 { &cache.input } else { &cache.activations[l - 1] };
            let w = &self.params[slot.weights..slot.biases];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, input, &mut grad[slot.weights + r * slot.cols..slot.weights + (r + 1) * slot.cols]);
                grad[slot.biases + r] += d;
            }
            if l == 0 {
                break;
            }
            // dL/da of the layer below.
            upstream_act.clear();
            upstream_act.resize(slot.cols, 0.0);
            for (row, &d) in w.chunks_exact(slot.cols).zip(&delta) {
                if d != 0.0 {
                    axpy(d, row, &mut upstream_act);
                }
            }
            let below = l - 1;
            let phi = self.spec.activation.with_param(betas[below]);
            let z = &cache.pre_activations[below];
            if trainable_beta {
                let mut g_beta = 0.0;
                for (u, &zi) in upstream_act.iter().zip(z) {
                    g_beta += u * phi.param_derivative(zi)?;
                }
                grad[beta_off + below] += g_beta;
            }
            delta.clear();
            delta.extend(upstream_act.iter().zip(z).map(|(u, &zi)| u * phi.derivative(zi)));
        }
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let ok = cache.input.len() == self.spec.input_dim
            && cache.pre_activations.len() == self.spec.depth + 1
            && cache.activations.len() == self.spec.depth + 1
            && self
                .slots
                .iter()
                .zip(cache.pre_activations.iter().zip(&cache.activations))
                .all(|(s, (z, a))| z.len() == s.rows && a.len() == s.rows);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("forward cache does not match network shape".into()))
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let layers = (0..=self.spec.depth)
            .map(|l| CheckpointLayer {
                rows: self.slots[l].rows,
                cols: self.slots[l].cols,
                weights: self.layer_weights(l).to_vec(),
                biases: self.layer_biases(l).to_vec(),
            })
            .collect();
        Checkpoint { spec: self.spec, layers, activation_params: self.activation_params().to_vec() }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut net = Network::zeros(ckpt.spec)?;
        if ckpt.layers.len() != net.slots.len() || ckpt.activation_params.len() != ckpt.spec.depth {
            return Err(Error::ShapeMismatch("checkpoint layer count does not match spec".into()));
        }
        for (slot, layer) in net.slots.clone().iter().zip(&ckpt.layers) {
            if layer.rows != slot.rows
                || layer.cols != slot.cols
                || layer.weights.len() != slot.rows * slot.cols
                || layer.biases.len() != slot.rows
            {
                return Err(Error::ShapeMismatch(format!(
                    "checkpoint layer {}x{} does not match expected {}x{}",
                    layer.rows, layer.cols, slot.rows, slot.cols
                )));
            }
            net.params[slot.weights..slot.biases].copy_from_slice(&layer.weights);
            net.params[slot.biases..slot.end()].copy_from_slice(&layer.biases);
        }
        net.activation_params_mut().copy_from_slice(&ckpt.activation_params);
        Ok(net)
    }
}

/// JSON checkpoint. `serde_json` writes shortest round-trip decimals, so
/// parameters survive a save/load cycle bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub layers: Vec<CheckpointLayer>,
    pub activation_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows × cols`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}
