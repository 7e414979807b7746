use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::common::{
    affine, affine_backward, check_finite, dropout_mask, elu, elu_grad, he_init, EpochMetrics,
    Nesterov,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{sigmoid, softplus};
use crate::{seeded_rng, Rng};

pub const MLP_FORMAT_VERSION: u32 = 1;
const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    /// Probability of dropping a hidden unit during training.
    pub dropout: f64,
    pub batch_norm: bool,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seed the pipeline uses to build the training generator.
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            dropout: 0.5,
            batch_norm: false,
            learning_rate: 0.02,
            momentum: 0.9,
            epochs: 20,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout {} must lie in [0, 1)",
                self.dropout
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer sizes must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and momentum in [0, 1)".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Layer sizes `[inputs, hidden..., 1]` plus the parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArch {
    pub sizes: Vec<usize>,
    pub batch_norm: bool,
}

impl MlpArch {
    pub fn new(inputs: usize, hidden: &[usize], batch_norm: bool) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self { sizes, batch_norm }
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn is_hidden(&self, l: usize) -> bool {
        l + 1 < self.n_layers()
    }

    /// Offsets of `(W, b)` and, for normalized hidden layers, `(gamma, beta)`.
    fn layout(&self) -> Vec<(usize, usize, Option<(usize, usize)>)> {
        let mut off = 0;
        let mut out = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = off;
            let b = w + fan_in * fan_out;
            off = b + fan_out;
            let bn = if self.batch_norm && self.is_hidden(l) {
                let g = off;
                off += 2 * fan_out;
                Some((g, g + fan_out))
            } else {
                None
            };
            out.push((w, b, bn));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        (0..self.n_layers())
            .map(|l| {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let bn = if self.batch_norm && self.is_hidden(l) {
                    2 * fan_out
                } else {
                    0
                };
                fan_in * fan_out + fan_out + bn
            })
            .sum()
    }

    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params()];
        for (l, (w, b, bn)) in self.layout().into_iter().enumerate() {
            he_init(&mut params[w..b], self.sizes[l], rng);
            if let Some((g, _)) = bn {
                params[g..g + self.sizes[l + 1]].fill(1.0);
            }
        }
        params
    }

    /// Mean cross-entropy of a batch and its gradient. Dropout masks are drawn
    /// from `rng` when `dropout > 0`; batch normalization uses batch statistics.
    pub fn loss_grad(
        &self,
        params: &[f64],
        rows: &[&[f64]],
        y: &[f64],
        dropout: f64,
        rng: &mut Rng,
    ) -> (f64, Vec<f64>) {
        let layout = self.layout();
        let bsz = rows.len();
        let nl = self.n_layers();
        // acts[l][i]: input to layer l for sample i
        let mut acts: Vec<Vec<Vec<f64>>> = vec![rows.iter().map(|r| r.to_vec()).collect()];
        let mut pre: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nl); // pre-activation (after BN)
        let mut norm: Vec<Option<(Vec<Vec<f64>>, Vec<f64>)>> = Vec::with_capacity(nl); // (z_hat, inv_std)
        let mut masks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nl);
        for l in 0..nl {
            let (w, b, bn) = layout[l];
            let out_dim = self.sizes[l + 1];
            let mut z: Vec<Vec<f64>> = acts[l]
                .iter()
                .map(|a| {
                    let mut o = vec![0.0; out_dim];
                    affine(&params[w..b], &params[b..b + out_dim], a, &mut o);
                    o
                })
                .collect();
            if let Some((g, beta)) = bn {
                let (zhat, inv_std) = batch_normalize(&z);
                for (zi, hi) in z.iter_mut().zip(&zhat) {
                    for j in 0..out_dim {
                        zi[j] = params[g + j] * hi[j] + params[beta + j];
                    }
                }
                norm.push(Some((zhat, inv_std)));
            } else {
                norm.push(None);
            }
            if self.is_hidden(l) {
                let m: Vec<Vec<f64>> = (0..bsz)
                    .map(|_| dropout_mask(out_dim, dropout, rng))
                    .collect();
                let a: Vec<Vec<f64>> = z
                    .iter()
                    .zip(&m)
                    .map(|(zi, mi)| zi.iter().zip(mi).map(|(v, k)| elu(*v) * k).collect())
                    .collect();
                acts.push(a);
                masks.push(m);
            } else {
                masks.push(Vec::new());
            }
            pre.push(z);
        }
        let logits: Vec<f64> = pre[nl - 1].iter().map(|z| z[0]).collect();
        let loss = logits
            .iter()
            .zip(y)
            .map(|(z, t)| softplus(*z) - t * z)
            .sum::<f64>()
            / bsz as f64;

        let mut grad = vec![0.0; params.len()];
        let mut delta: Vec<Vec<f64>> = logits
            .iter()
            .zip(y)
            .map(|(z, t)| vec![(sigmoid(*z) - t) / bsz as f64])
            .collect();
        for l in (0..nl).rev() {
            let (w, b, bn) = layout[l];
            let (in_dim, out_dim) = (self.sizes[l], self.sizes[l + 1]);
            if self.is_hidden(l) {
                // delta currently holds dL/da; move through dropout and ELU
                for ((d, zi), mi) in delta.iter_mut().zip(&pre[l]).zip(&masks[l]) {
                    for j in 0..out_dim {
                        d[j] *= mi[j] * elu_grad(zi[j]);
                    }
                }
            }
            if let (Some((g, beta)), Some((zhat, inv_std))) = (bn, &norm[l]) {
                let mut sum_d = vec![0.0; out_dim];
                let mut sum_dh = vec![0.0; out_dim];
                for (d, h) in delta.iter().zip(zhat) {
                    for j in 0..out_dim {
                        grad[g + j] += d[j] * h[j];
                        grad[beta + j] += d[j];
                        sum_d[j] += d[j] * params[g + j];
                        sum_dh[j] += d[j] * params[g + j] * h[j];
                    }
                }
                let nb = bsz as f64;
                for (d, h) in delta.iter_mut().zip(zhat) {
                    for j in 0..out_dim {
                        let dh = d[j] * params[g + j];
                        d[j] = inv_std[j] / nb * (nb * dh - sum_d[j] - h[j] * sum_dh[j]);
                    }
                }
            }
            let mut next = vec![vec![0.0; in_dim]; if l > 0 { bsz } else { 0 }];
            let (gw, rest) = grad.split_at_mut(b);
            for i in 0..bsz {
                affine_backward(
                    &params[w..b],
                    &acts[l][i],
                    &delta[i],
                    &mut gw[w..b],
                    &mut rest[..out_dim],
                    if l > 0 { Some(&mut next[i]) } else { None },
                );
            }
            delta = next;
        }
        (loss, grad)
    }
}

/// Per-unit `(z - mean) / sqrt(var + eps)` over the batch, plus `1 / sqrt(var + eps)`.
fn batch_normalize(z: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = z.len() as f64;
    let dim = z[0].len();
    let mut mean = vec![0.0; dim];
    for zi in z {
        for j in 0..dim {
            mean[j] += zi[j] / n;
        }
    }
    let mut var = vec![0.0; dim];
    for zi in z {
        for j in 0..dim {
            var[j] += (zi[j] - mean[j]).powi(2) / n;
        }
    }
    let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let zhat = z
        .iter()
        .map(|zi| (0..dim).map(|j| (zi[j] - mean[j]) * inv[j]).collect())
        .collect();
    (zhat, inv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpMeta {
    pub seed: u64,
    pub config: MlpConfig,
    pub feature_names: Vec<String>,
    pub log: Vec<EpochMetrics>,
}

/// A trained feed-forward classifier. Inference is deterministic: dropout is
/// off and batch normalization uses statistics of the full training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub version: u32,
    pub arch: MlpArch,
    pub params: Vec<f64>,
    /// One entry per hidden layer when batch normalization is on.
    pub bn_stats: Vec<BatchNormStats>,
    pub meta: MlpMeta,
}

impl MlpModel {
    pub fn arity(&self) -> usize {
        self.arch.sizes[0]
    }

    fn forward(&self, row: &[f64]) -> f64 {
        let layout = self.arch.layout();
        let mut a = row.to_vec();
        for (l, &(w, b, bn)) in layout.iter().enumerate() {
            let out_dim = self.arch.sizes[l + 1];
            let mut z = vec![0.0; out_dim];
            affine(&self.params[w..b], &self.params[b..b + out_dim], &a, &mut z);
            if let Some((g, beta)) = bn {
                let s = &self.bn_stats[l];
                for j in 0..out_dim {
                    z[j] = self.params[g + j] * (z[j] - s.mean[j]) / (s.var[j] + BN_EPS).sqrt()
                        + self.params[beta + j];
                }
            }
            if self.arch.is_hidden(l) {
                a = z.into_iter().map(elu).collect();
            } else {
                return z[0];
            }
        }
        unreachable!("the output layer returns")
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                found: row.len(),
            });
        }
        Ok(sigmoid(self.forward(row)))
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MlpModel = serde_json::from_str(text)?;
        if model.version != MLP_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network format version {}",
                model.version
            )));
        }
        if model.params.len() != model.arch.n_params() {
            return Err(Error::Format(
                "parameter vector does not match the architecture".into(),
            ));
        }
        Ok(model)
    }

    /// Population statistics of each normalized layer's affine output over `rows`.
    fn fit_bn_stats(&mut self, rows: &[&[f64]]) {
        if !self.arch.batch_norm {
            return;
        }
        self.bn_stats.clear();
        let layout = self.arch.layout();
        let mut acts: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        for (l, &(w, b, bn)) in layout.iter().enumerate() {
            let Some((g, beta)) = bn else { break };
            let out_dim = self.arch.sizes[l + 1];
            let z: Vec<Vec<f64>> = acts
                .iter()
                .map(|a| {
                    let mut o = vec![0.0; out_dim];
                    affine(&self.params[w..b], &self.params[b..b + out_dim], a, &mut o);
                    o
                })
                .collect();
            let n = z.len() as f64;
            let mean: Vec<f64> = (0..out_dim)
                .map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let var: Vec<f64> = (0..out_dim)
                .map(|j| z.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n)
                .collect();
            acts =
                z.iter()
                    .map(|r| {
                        (0..out_dim)
                            .map(|j| {
                                elu(self.params[g + j] * (r[j] - mean[j])
                                    / (var[j] + BN_EPS).sqrt()
                                    + self.params[beta + j])
                            })
                            .collect()
                    })
                    .collect();
            self.bn_stats.push(BatchNormStats { mean, var });
        }
    }
}

/// Trains a feed-forward classifier with mini-batch Nesterov SGD on mean
/// cross-entropy. The inputs should already be standardized.
pub fn train_mlp(
    x: &FeatureMatrix,
    y: &[u8],
    config: &MlpConfig,
    rng: &mut Rng,
) -> Result<MlpModel> {
    config.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v != 0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let seed = rng.next_u64();
    let mut local = seeded_rng(seed);
    let arch = MlpArch::new(x.n_cols(), &config.hidden, config.batch_norm);
    let mut params = arch.init(&mut local);
    let mut opt = Nesterov::new(params.len(), config.momentum);
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v != 0))).collect();
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    // a batch of one cannot be normalized
    let min_batch = if config.batch_norm { 2 } else { 1 };
    for epoch in 1..=config.epochs {
        order.shuffle(&mut local);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < min_batch {
                continue;
            }
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| x.row(i)).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = arch.loss_grad(&params, &rows, &t, config.dropout, &mut local);
            check_finite(loss, epoch)?;
            opt.step(&mut params, &grad, config.learning_rate);
            total += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let loss = total / seen.max(1) as f64;
        check_finite(loss, epoch)?;
        log.push(EpochMetrics {
            epoch,
            loss,
            validation_auc: None,
            learning_rate: config.learning_rate,
        });
    }
    let mut model = MlpModel {
        version: MLP_FORMAT_VERSION,
        arch,
        params,
        bn_stats: Vec::new(),
        meta: MlpMeta {
            seed,
            config: config.clone(),
            feature_names: x.names().iter().map(|s| s.to_string()).collect(),
            log,
        },
    };
    let rows: Vec<&[f64]> = (0..x.n_rows()).map(|i| x.row(i)).collect();
    model.fit_bn_stats(&rows);
    Ok(model)
}
