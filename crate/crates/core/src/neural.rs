//! A small fully connected network mapping RGB to (HbO2, Hb).
//!
//! Hidden layers use batch normalization followed by softplus; the output
//! layer is linear. Training minimizes mean squared error on z-scored labels
//! plus an L2 penalty on the weights, using ADAM with a step learning-rate
//! schedule. Everything is deterministic given the seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{RgbImage, SampledLine};
use crate::error::{Error, Result};
use crate::io::{read_framed, write_framed};
use crate::regression::split_indices;
use crate::tissue::HemodynamicMaps;

/// Width of the first hidden layer.
pub const FIRST_HIDDEN: usize = 18;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_drop_factor: f64,
    pub lr_drop_period: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Seed of the train/validation split (shared with the regression split).
    pub split_seed: u64,
    pub train_frac: f64,
    /// Widths of hidden layers 2..4.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.01,
            lr_drop_factor: 0.1,
            lr_drop_period: 5,
            weight_decay: 1e-5,
            batch_size: 20,
            epochs: 15,
            seed: 0,
            split_seed: 0,
            train_frac: 0.8,
            hidden: vec![16, 8, 4],
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let positive = [self.lr0, self.lr_drop_factor, self.train_frac];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || self.weight_decay < 0.0
            || self.lr_drop_period == 0
            || self.batch_size < 2
            || self.epochs == 0
            || self.train_frac > 1.0
            || self.hidden.contains(&0)
        {
            return Err(Error::InvalidArgument(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![3, FIRST_HIDDEN];
        s.extend(&self.hidden);
        s.push(2);
        s
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_drop_factor.powi((epoch / self.lr_drop_period) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean minibatch objective (batch statistics, includes weight decay).
    pub batch_loss: f64,
    /// Inference-mode MSE on the training split after the epoch.
    pub train: f64,
    /// Inference-mode MSE on the validation split after the epoch.
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out × n_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    layers: Vec<Dense>,
    norms: Vec<BatchNorm>,
    label_mean: [f64; 2],
    label_std: [f64; 2],
    config: TrainConfig,
}

/// Gradients laid out like the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Self {
            w: m.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: m.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            gamma: m.norms.iter().map(|n| vec![0.0; n.gamma.len()]).collect(),
            beta: m.norms.iter().map(|n| vec![0.0; n.beta.len()]).collect(),
        }
    }

    fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.w.iter().chain(&self.b).chain(&self.gamma).chain(&self.beta)
    }

    /// Flattened in the same order as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().flatten().copied().collect()
    }
}

struct Cache {
    /// Inputs to each dense layer.
    inputs: Vec<Vec<f64>>,
    /// Normalized pre-activations per hidden layer.
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    /// Batch-norm outputs (softplus inputs) per hidden layer.
    bn_out: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Xavier-uniform weights, zero biases, unit BN scale.
    pub fn init(cfg: &TrainConfig) -> Self {
        let sizes = cfg.layer_sizes();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        let layers: Vec<Dense> = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let a = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    n_in,
                    n_out,
                    w: (0..n_in * n_out).map(|_| rng.random_range(-a..=a)).collect(),
                    b: vec![0.0; n_out],
                }
            })
            .collect();
        let norms = sizes[1..sizes.len() - 1]
            .iter()
            .map(|&n| BatchNorm {
                gamma: vec![1.0; n],
                beta: vec![0.0; n],
                running_mean: vec![0.0; n],
                running_var: vec![1.0; n],
            })
            .collect();
        Self {
            sizes,
            layers,
            norms,
            label_mean: [0.0; 2],
            label_std: [1.0; 2],
            config: cfg.clone(),
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn label_scaling(&self) -> ([f64; 2], [f64; 2]) {
        (self.label_mean, self.label_std)
    }

    /// Weights (`18 × 3`, row-major) and biases of the first layer.
    pub fn first_layer(&self) -> (&[f64], &[f64]) {
        (&self.layers[0].w, &self.layers[0].b)
    }

    /// Replaces the first layer's weights and biases.
    pub fn set_first_layer(&mut self, w: Vec<f64>, b: Vec<f64>) -> Result<()> {
        if w.len() != FIRST_HIDDEN * 3 || b.len() != FIRST_HIDDEN {
            return Err(Error::Dimension("first layer is 18 x 3 plus 18 biases".into()));
        }
        self.layers[0].w = w;
        self.layers[0].b = b;
        Ok(())
    }

    fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.layers
            .iter()
            .map(|l| &l.w)
            .chain(self.layers.iter().map(|l| &l.b))
            .chain(self.norms.iter().map(|n| &n.gamma))
            .chain(self.norms.iter().map(|n| &n.beta))
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let (layers, norms) = (&mut self.layers, &mut self.norms);
        let mut ws = Vec::new();
        let mut bs = Vec::new();
        for l in layers.iter_mut() {
            ws.push(&mut l.w);
            bs.push(&mut l.b);
        }
        let mut gs = Vec::new();
        let mut betas = Vec::new();
        for n in norms.iter_mut() {
            gs.push(&mut n.gamma);
            betas.push(&mut n.beta);
        }
        ws.into_iter().chain(bs).chain(gs).chain(betas).collect()
    }

    /// All trainable parameters, flattened: weights, biases, BN scales, BN shifts.
    pub fn parameters(&self) -> Vec<f64> {
        self.tensors().flatten().copied().collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let n: usize = self.tensors().map(Vec::len).sum();
        if flat.len() != n {
            return Err(Error::Dimension(format!("expected {n} parameters, got {}", flat.len())));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// Training-mode forward pass over a batch (`x` is `B × 3`, row-major).
    fn forward_train(&self, x: &[f64], batch: usize) -> (Vec<f64>, Cache) {
        let mut cache = Cache {
            inputs: Vec::new(),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            bn_out: Vec::new(),
        };
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let z = dense_forward(layer, &a, batch);
            cache.inputs.push(a);
            if li == last {
                return (z, cache);
            }
            let bn = &self.norms[li];
            let n = layer.n_out;
            let mut xhat = vec![0.0; z.len()];
            let mut inv_std = vec![0.0; n];
            let mut y = vec![0.0; z.len()];
            for j in 0..n {
                let mean = (0..batch).map(|r| z[r * n + j]).sum::<f64>() / batch as f64;
                let var = (0..batch).map(|r| (z[r * n + j] - mean).powi(2)).sum::<f64>() / batch as f64;
                let is = 1.0 / (var + BN_EPS).sqrt();
                inv_std[j] = is;
                for r in 0..batch {
                    let h = (z[r * n + j] - mean) * is;
                    xhat[r * n + j] = h;
                    y[r * n + j] = bn.gamma[j] * h + bn.beta[j];
                }
            }
            a = y.iter().map(|&v| softplus(v)).collect();
            cache.xhat.push(xhat);
            cache.inv_std.push(inv_std);
            cache.bn_out.push(y);
        }
        unreachable!("network has an output layer")
    }

    /// Batch means and biased variances of each hidden pre-activation.
    fn batch_stats(&self, x: &[f64], batch: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut stats = Vec::new();
        let mut a = x.to_vec();
        for (li, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            let z = dense_forward(layer, &a, batch);
            let n = layer.n_out;
            let mut means = vec![0.0; n];
            let mut vars = vec![0.0; n];
            for j in 0..n {
                let m = (0..batch).map(|r| z[r * n + j]).sum::<f64>() / batch as f64;
                means[j] = m;
                vars[j] = (0..batch).map(|r| (z[r * n + j] - m).powi(2)).sum::<f64>() / batch as f64;
            }
            let bn = &self.norms[li];
            a = z
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let j = i % n;
                    softplus(bn.gamma[j] * (v - means[j]) / (vars[j] + BN_EPS).sqrt() + bn.beta[j])
                })
                .collect();
            stats.push((means, vars));
        }
        stats
    }

    /// Loss on one batch with batch statistics, and its analytic gradient.
    ///
    /// `targets` are standardized labels (`B × 2`). The loss is
    /// `mean((y − t)²) + weight_decay · Σ W²` over all dense weights.
    pub fn loss_and_gradient(&self, x: &[f64], targets: &[f64]) -> (f64, Gradients) {
        let batch = x.len() / 3;
        let (out, cache) = self.forward_train(x, batch);
        let count = out.len() as f64;
        let mut loss = out.iter().zip(targets).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / count;
        let wd = self.config.weight_decay;
        loss += wd * self.layers.iter().flat_map(|l| &l.w).map(|w| w * w).sum::<f64>();

        let mut g = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = out.iter().zip(targets).map(|(o, t)| 2.0 * (o - t) / count).collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.inputs[li];
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            for r in 0..batch {
                for o in 0..n_out {
                    let d = delta[r * n_out + o];
                    g.b[li][o] += d;
                    for i in 0..n_in {
                        g.w[li][o * n_in + i] += d * input[r * n_in + i];
                    }
                }
            }
            for (gw, w) in g.w[li].iter_mut().zip(&layer.w) {
                *gw += 2.0 * wd * w;
            }
            if li == 0 {
                break;
            }
            // back through the dense layer
            let mut da = vec![0.0; batch * n_in];
            for r in 0..batch {
                for o in 0..n_out {
                    let d = delta[r * n_out + o];
                    for i in 0..n_in {
                        da[r * n_in + i] += d * layer.w[o * n_in + i];
                    }
                }
            }
            // softplus then batch norm of the previous hidden layer
            let h = li - 1;
            let n = n_in;
            let y = &cache.bn_out[h];
            let xhat = &cache.xhat[h];
            let dy: Vec<f64> = da.iter().zip(y).map(|(d, &v)| d * sigmoid(v)).collect();
            let mut dz = vec![0.0; batch * n];
            for j in 0..n {
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for r in 0..batch {
                    sum_dy += dy[r * n + j];
                    sum_dy_xhat += dy[r * n + j] * xhat[r * n + j];
                }
                g.beta[h][j] = sum_dy;
                g.gamma[h][j] = sum_dy_xhat;
                let gamma = self.norms[h].gamma[j];
                let scale = gamma * cache.inv_std[h][j] / batch as f64;
                for r in 0..batch {
                    let i = r * n + j;
                    dz[i] = scale * (batch as f64 * dy[i] - sum_dy - xhat[i] * sum_dy_xhat);
                }
            }
            delta = dz;
        }
        (loss, g)
    }

    /// Inference-mode forward pass returning standardized outputs.
    fn forward_one(&self, rgb: [f64; 3]) -> [f64; 2] {
        let mut a = rgb.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let z = dense_forward(layer, &a, 1);
            if li == last {
                return [z[0], z[1]];
            }
            let bn = &self.norms[li];
            a = z
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let h = (v - bn.running_mean[j]) / (bn.running_var[j] + BN_EPS).sqrt();
                    softplus(bn.gamma[j] * h + bn.beta[j])
                })
                .collect();
        }
        unreachable!("network has an output layer")
    }

    /// `(HbO2, Hb)` in label units, not clamped.
    pub fn predict(&self, rgb: [f64; 3]) -> [f64; 2] {
        let z = self.forward_one(rgb);
        [
            z[0] * self.label_std[0] + self.label_mean[0],
            z[1] * self.label_std[1] + self.label_mean[1],
        ]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = MlpHeader {
            format: MLP_FORMAT.into(),
            layer_sizes: self.sizes.clone(),
            label_mean: self.label_mean,
            label_std: self.label_std,
            config: self.config.clone(),
        };
        let mut payload = self.parameters();
        for n in &self.norms {
            payload.extend(&n.running_mean);
            payload.extend(&n.running_var);
        }
        write_framed(path, &header, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (h, payload): (MlpHeader, _) = read_framed(path, |h: &MlpHeader| payload_len(&h.layer_sizes))?;
        if h.format != MLP_FORMAT {
            return Err(Error::MalformedHeader(format!("not an MLP model: {:?}", h.format)));
        }
        let mut cfg = h.config.clone();
        cfg.hidden = h.layer_sizes[2..h.layer_sizes.len() - 1].to_vec();
        if cfg.layer_sizes() != h.layer_sizes {
            return Err(Error::MalformedHeader(format!(
                "layer sizes {:?} must be [3, 18, ..., 2]",
                h.layer_sizes
            )));
        }
        let mut m = MlpModel::init(&cfg);
        let n_params = m.parameters().len();
        m.set_parameters(&payload[..n_params])?;
        let mut off = n_params;
        for n in m.norms.iter_mut() {
            let k = n.gamma.len();
            n.running_mean.copy_from_slice(&payload[off..off + k]);
            n.running_var.copy_from_slice(&payload[off + k..off + 2 * k]);
            off += 2 * k;
        }
        m.label_mean = h.label_mean;
        m.label_std = h.label_std;
        m.config = h.config;
        Ok(m)
    }
}

fn payload_len(sizes: &[usize]) -> usize {
    let dense: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let hidden: usize = sizes[1..sizes.len().saturating_sub(1)].iter().sum();
    dense + 4 * hidden
}

const MLP_FORMAT: &str = "spectracube-mlp-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpHeader {
    format: String,
    layer_sizes: Vec<usize>,
    label_mean: [f64; 2],
    label_std: [f64; 2],
    config: TrainConfig,
}

fn dense_forward(layer: &Dense, a: &[f64], batch: usize) -> Vec<f64> {
    let (n_in, n_out) = (layer.n_in, layer.n_out);
    let mut z = vec![0.0; batch * n_out];
    for r in 0..batch {
        let x = &a[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let w = &layer.w[o * n_in..(o + 1) * n_in];
            z[r * n_out + o] = layer.b[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    z
}

/// Outcome of [`train_mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
}

const ADAM: Adam = Adam {
    beta1: 0.9,
    beta2: 0.999,
    eps: 1e-8,
};

/// Trains on `rgb` (m rows) and `labels` (m rows of `(HbO2, Hb)`).
pub fn train_mlp(rgb: &[[f64; 3]], labels: &[[f64; 2]], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if rgb.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} RGB rows but {} label rows",
            rgb.len(),
            labels.len()
        )));
    }
    if let Some(index) = labels.iter().flatten().chain(rgb.iter().flatten()).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (train_idx, val_idx) = split_indices(rgb.len(), cfg.train_frac, cfg.split_seed);
    if train_idx.len() < cfg.batch_size {
        return Err(Error::InsufficientSamples {
            needed: cfg.batch_size,
            got: train_idx.len(),
        });
    }

    let mut model = MlpModel::init(cfg);
    for c in 0..2 {
        let n = train_idx.len() as f64;
        let mean = train_idx.iter().map(|&i| labels[i][c]).sum::<f64>() / n;
        let var = train_idx.iter().map(|&i| (labels[i][c] - mean).powi(2)).sum::<f64>() / n;
        model.label_mean[c] = mean;
        // a constant column carries no signal: scale 0 reproduces it exactly
        model.label_std[c] = if var.sqrt() > 1e-12 * mean.abs().max(1.0) { var.sqrt() } else { 0.0 };
    }
    let z = |i: usize| -> [f64; 2] {
        std::array::from_fn(|c| {
            let s = model.label_std[c];
            if s > 0.0 {
                (labels[i][c] - model.label_mean[c]) / s
            } else {
                0.0
            }
        })
    };
    let targets: Vec<[f64; 2]> = (0..rgb.len()).map(z).collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let n_params = model.parameters().len();
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut step = 0i32;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order = train_idx.clone();

    let eval_loss = |model: &MlpModel, idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter()
            .map(|&i| {
                let o = model.forward_one(rgb[i]);
                (o[0] - targets[i][0]).powi(2) + (o[1] - targets[i][1]).powi(2)
            })
            .sum::<f64>()
            / (2 * idx.len()) as f64
    };

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x: Vec<f64> = chunk.iter().flat_map(|&i| rgb[i]).collect();
            let t: Vec<f64> = chunk.iter().flat_map(|&i| targets[i]).collect();
            let (loss, grad) = model.loss_and_gradient(&x, &t);
            if !loss.is_finite() {
                history.push(EpochLoss {
                    epoch,
                    batch_loss: loss,
                    train: f64::NAN,
                    val: f64::NAN,
                });
                return Err(Error::Diverged { epoch, history });
            }
            epoch_loss += loss;
            batches += 1;

            // running statistics from this batch
            let stats = model.batch_stats(&x, chunk.len());
            for (bn, (mean, var)) in model.norms.iter_mut().zip(stats) {
                let unbiased = chunk.len() as f64 / (chunk.len() as f64 - 1.0);
                for j in 0..bn.running_mean.len() {
                    bn.running_mean[j] = BN_MOMENTUM * bn.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                    bn.running_var[j] =
                        BN_MOMENTUM * bn.running_var[j] + (1.0 - BN_MOMENTUM) * var[j] * unbiased;
                }
            }

            step += 1;
            let g = grad.flatten();
            let mut p = model.parameters();
            let bc1 = 1.0 - ADAM.beta1.powi(step);
            let bc2 = 1.0 - ADAM.beta2.powi(step);
            for k in 0..n_params {
                m1[k] = ADAM.beta1 * m1[k] + (1.0 - ADAM.beta1) * g[k];
                m2[k] = ADAM.beta2 * m2[k] + (1.0 - ADAM.beta2) * g[k] * g[k];
                p[k] -= lr * (m1[k] / bc1) / ((m2[k] / bc2).sqrt() + ADAM.eps);
            }
            model.set_parameters(&p)?;
        }
        let batch_loss = epoch_loss / batches.max(1) as f64;
        let train = eval_loss(&model, &train_idx);
        let val = eval_loss(&model, &val_idx);
        history.push(EpochLoss {
            epoch,
            batch_loss,
            train,
            val,
        });
        if !batch_loss.is_finite() || !train.is_finite() || !val.is_finite() || model.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, history });
        }
    }
    Ok((
        model,
        TrainReport {
            history,
            train_indices: train_idx,
            val_indices: val_idx,
        },
    ))
}

/// Pre-activation outputs `N_i = w_i · (R, G, B) + bias_i` of the first hidden layer.
pub fn first_layer_outputs(model: &MlpModel, rgb: [f64; 3]) -> Vec<f64> {
    dense_forward(&model.layers[0], &rgb, 1)
}

/// Differences of first-layer outputs between two colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProbe {
    /// `N(a) − N(b)` in node order.
    pub raw: Vec<f64>,
    /// Node indices sorted by increasing difference.
    pub rank_order: Vec<usize>,
    /// `raw` permuted by `rank_order`.
    pub ranked: Vec<f64>,
}

pub fn node_difference_probe(model: &MlpModel, rgb_a: [f64; 3], rgb_b: [f64; 3]) -> NodeProbe {
    let a = first_layer_outputs(model, rgb_a);
    let b = first_layer_outputs(model, rgb_b);
    let raw: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut rank_order: Vec<usize> = (0..raw.len()).collect();
    rank_order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]).then(i.cmp(&j)));
    let ranked = rank_order.iter().map(|&i| raw[i]).collect();
    NodeProbe {
        raw,
        rank_order,
        ranked,
    }
}

/// Linear relation between a first-layer node and the spectral intensity at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCalibration {
    pub band: usize,
    pub wavelength_nm: f64,
    /// Least-squares slope of `N_i` against `I(λ)`.
    pub slope: f64,
    pub r2: f64,
}

/// For each first-layer node, the wavelength whose intensity over the line best
/// explains the node's output (highest squared correlation).
pub fn calibrate_nodes(model: &MlpModel, line: &SampledLine) -> Result<Vec<NodeCalibration>> {
    let m = line.len();
    if m < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: m });
    }
    let outs: Vec<Vec<f64>> = line.rgb().iter().map(|&p| first_layer_outputs(model, p)).collect();
    let k = line.grid().count();
    let centered = |v: Vec<f64>| -> (Vec<f64>, f64) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let ss = c.iter().map(|x| x * x).sum();
        (c, ss)
    };
    let bands: Vec<(Vec<f64>, f64)> = (0..k)
        .map(|j| centered((0..m).map(|i| line.spectrum_row(i)[j]).collect()))
        .collect();
    Ok((0..FIRST_HIDDEN)
        .map(|node| {
            let (n, snn) = centered(outs.iter().map(|o| o[node]).collect());
            let mut best = NodeCalibration {
                band: 0,
                wavelength_nm: line.grid().wavelength(0),
                slope: 0.0,
                r2: -1.0,
            };
            for (j, (b, sbb)) in bands.iter().enumerate() {
                if *sbb <= 0.0 || snn <= 0.0 {
                    continue;
                }
                let snb: f64 = n.iter().zip(b).map(|(x, y)| x * y).sum();
                let r2 = snb * snb / (snn * sbb);
                if r2 > best.r2 {
                    best = NodeCalibration {
                        band: j,
                        wavelength_nm: line.grid().wavelength(j),
                        slope: snb / sbb,
                        r2,
                    };
                }
            }
            best
        })
        .collect())
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Per-pixel inference; concentrations are clamped at zero.
///
/// Pixels whose clamped outputs are both zero get `spo2 = 0` and are marked
/// not converged.
pub fn infer_maps(model: &MlpModel, img: &RgbImage) -> HemodynamicMaps {
    let cols = img.cols();
    let out: Vec<[f64; 2]> = (0..img.rows())
        .into_par_iter()
        .flat_map_iter(|r| (0..cols).map(move |c| model.predict(img.pixel(r, c))))
        .collect();
    let hbo2: Vec<f64> = out.iter().map(|o| o[0].max(0.0)).collect();
    let hb: Vec<f64> = out.iter().map(|o| o[1].max(0.0)).collect();
    let converged: Vec<bool> = hbo2.iter().zip(&hb).map(|(a, b)| a + b > 0.0).collect();
    let spo2 = hbo2
        .iter()
        .zip(&hb)
        .map(|(&a, &b)| if a + b > 0.0 { a / (a + b) } else { 0.0 })
        .collect();
    HemodynamicMaps {
        rows: img.rows(),
        cols,
        hbo2,
        hb,
        spo2,
        rss: vec![0.0; img.len()],
        converged,
        params: None,
    }
}

/// Relative error `|a − n| / max(|a|, |n|)` between analytic and central-difference
/// gradients for every parameter, on one batch. Returns the worst value over
/// parameters whose gradients are not both below `floor`.
pub fn gradient_check(model: &MlpModel, x: &[f64], targets: &[f64], h: f64, floor: f64) -> f64 {
    let (_, g) = model.loss_and_gradient(x, targets);
    let analytic = g.flatten();
    let p0 = model.parameters();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..p0.len() {
        let mut p = p0.clone();
        p[k] = p0[k] + h;
        probe.set_parameters(&p).expect("same length");
        let fp = probe.loss_and_gradient(x, targets).0;
        p[k] = p0[k] - h;
        probe.set_parameters(&p).expect("same length");
        let fm = probe.loss_and_gradient(x, targets).0;
        let numeric = (fp - fm) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs());
        if scale > floor {
            worst = worst.max((analytic[k] - numeric).abs() / scale);
        }
    }
    worst
}
