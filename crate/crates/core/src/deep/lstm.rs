use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::common::{
    affine, affine_backward, check_finite, dropout_mask, elu, elu_grad, EpochMetrics, Nesterov,
    Window,
};
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::stats::sigmoid;
use crate::{seeded_rng, Rng};

pub const LSTM_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    /// Minutes per input sequence.
    pub window: usize,
    pub layers: usize,
    pub width: usize,
    /// Units of the fully connected layer before the soft-max.
    pub fc_width: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub decay: f64,
    pub momentum: f64,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Windows per mini-batch; `None` means twice the window length.
    pub batch_size: Option<usize>,
    pub validation_fraction: f64,
    /// Rescales the batch gradient to this Euclidean norm when exceeded.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            window: 120,
            layers: 3,
            width: 32,
            fc_width: 16,
            dropout: 0.6,
            learning_rate: 0.05,
            decay: 0.95,
            momentum: 0.9,
            patience: 5,
            max_epochs: 35,
            batch_size: None,
            validation_fraction: 0.2,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.window < 2 {
            return bad("window length must be at least 2");
        }
        if self.layers == 0 || self.width == 0 || self.fc_width == 0 {
            return bad("layer count and widths must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("learning-rate decay must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation fraction must lie in (0, 0.5]");
        }
        if !(self.learning_rate > 0.0)
            || !(0.0..1.0).contains(&self.momentum)
            || self.max_epochs == 0
        {
            return bad("learning rate, momentum or epoch budget out of range");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(2 * self.window)
    }
}

/// Shape of a stacked bi-directional LSTM with a fully connected read-out.
///
/// Each layer runs a forward and a backward cell over the sequence and
/// concatenates their hidden states at every step. The read-out takes the
/// forward state at the last step and the backward state at the first step.
/// Gate order inside each cell is input, forget, candidate, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmArch {
    pub inputs: usize,
    pub width: usize,
    pub layers: usize,
    pub fc_width: usize,
}

#[derive(Clone, Copy, Debug)]
struct CellOffsets {
    w: usize,
    b: usize,
    in_dim: usize,
}

struct Layout {
    /// `cells[layer][direction]`, direction 0 forward and 1 backward.
    cells: Vec<[CellOffsets; 2]>,
    fc_w: usize,
    fc_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

/// Activations of one direction, indexed by processing step.
struct DirCache {
    inputs: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Post-nonlinearity gates `[i, f, g, o]`, each of width `H`.
    gates: Vec<Vec<f64>>,
}

struct LayerCache {
    dirs: [DirCache; 2],
    /// Dropout mask applied to this layer's concatenated outputs, per step.
    masks: Vec<Vec<f64>>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    readout: Vec<f64>,
    readout_mask: Vec<f64>,
    fc_pre: Vec<f64>,
    fc_act: Vec<f64>,
    logits: [f64; 2],
}

impl BiLstmArch {
    fn layout(&self) -> Layout {
        let h = self.width;
        let mut off = 0;
        let mut cells = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            let in_dim = if l == 0 { self.inputs } else { 2 * h };
            let mut pair = [CellOffsets { w: 0, b: 0, in_dim }; 2];
            for cell in &mut pair {
                cell.w = off;
                cell.b = off + 4 * h * (in_dim + h);
                off = cell.b + 4 * h;
            }
            cells.push(pair);
        }
        let fc_w = off;
        let fc_b = fc_w + self.fc_width * 2 * h;
        let out_w = fc_b + self.fc_width;
        let out_b = out_w + 2 * self.fc_width;
        Layout {
            cells,
            fc_w,
            fc_b,
            out_w,
            out_b,
            total: out_b + 2,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }

    /// Uniform `[-1/sqrt(H), 1/sqrt(H)]` cell weights with forget-gate bias 1
    /// and He-normal read-out weights.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        use rand::Rng as _;
        let lay = self.layout();
        let mut p = vec![0.0; lay.total];
        let bound = 1.0 / (self.width as f64).sqrt();
        for pair in &lay.cells {
            for cell in pair {
                for v in &mut p[cell.w..cell.b] {
                    *v = rng.random_range(-bound..bound);
                }
                p[cell.b + self.width..cell.b + 2 * self.width].fill(1.0);
            }
        }
        super::common::he_init(&mut p[lay.fc_w..lay.fc_b], 2 * self.width, rng);
        super::common::he_init(&mut p[lay.out_w..lay.out_b], self.fc_width, rng);
        p
    }

    fn run_direction(
        &self,
        params: &[f64],
        cell: CellOffsets,
        inputs: &[Vec<f64>],
        reverse: bool,
    ) -> DirCache {
        let h = self.width;
        let n = inputs.len();
        let mut cache = DirCache {
            inputs: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            gates: Vec::with_capacity(n),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut xh = vec![0.0; cell.in_dim + h];
        let mut a = vec![0.0; 4 * h];
        for s in 0..n {
            let t = if reverse { n - 1 - s } else { s };
            xh[..cell.in_dim].copy_from_slice(&inputs[t]);
            xh[cell.in_dim..].copy_from_slice(&h_prev);
            affine(
                &params[cell.w..cell.b],
                &params[cell.b..cell.b + 4 * h],
                &xh,
                &mut a,
            );
            let mut gates = vec![0.0; 4 * h];
            let mut c = vec![0.0; h];
            let mut hh = vec![0.0; h];
            for j in 0..h {
                let i = sigmoid(a[j]);
                let f = sigmoid(a[h + j]);
                let g = a[2 * h + j].tanh();
                let o = sigmoid(a[3 * h + j]);
                c[j] = f * c_prev[j] + i * g;
                hh[j] = o * c[j].tanh();
                gates[j] = i;
                gates[h + j] = f;
                gates[2 * h + j] = g;
                gates[3 * h + j] = o;
            }
            cache.inputs.push(inputs[t].clone());
            cache.gates.push(gates);
            c_prev.clone_from(&c);
            h_prev.clone_from(&hh);
            cache.c.push(c);
            cache.h.push(hh);
        }
        cache
    }

    /// Back-propagation through time for one direction. `dh[s]` is the loss
    /// gradient reaching the hidden state at processing step `s`; returns the
    /// gradient for each processing step's input.
    fn backward_direction(
        &self,
        params: &[f64],
        cell: CellOffsets,
        cache: &DirCache,
        dh: &[Vec<f64>],
        grad: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let h = self.width;
        let n = cache.h.len();
        let zeros = vec![0.0; h];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dinputs = vec![Vec::new(); n];
        let mut da = vec![0.0; 4 * h];
        let mut xh = vec![0.0; cell.in_dim + h];
        for s in (0..n).rev() {
            let gates = &cache.gates[s];
            let c_prev = if s > 0 { &cache.c[s - 1] } else { &zeros };
            let h_prev = if s > 0 { &cache.h[s - 1] } else { &zeros };
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = cache.c[s][j].tanh();
                let dhj = dh[s][j] + dh_next[j];
                let dc = dhj * o * (1.0 - tc * tc) + dc_next[j];
                da[j] = dc * g * i * (1.0 - i);
                da[h + j] = dc * c_prev[j] * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - g * g);
                da[3 * h + j] = dhj * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            xh[..cell.in_dim].copy_from_slice(&cache.inputs[s]);
            xh[cell.in_dim..].copy_from_slice(h_prev);
            let mut dxh = vec![0.0; cell.in_dim + h];
            let (gw, rest) = grad.split_at_mut(cell.b);
            affine_backward(
                &params[cell.w..cell.b],
                &xh,
                &da,
                &mut gw[cell.w..],
                &mut rest[..4 * h],
                Some(&mut dxh),
            );
            dh_next.copy_from_slice(&dxh[cell.in_dim..]);
            dxh.truncate(cell.in_dim);
            dinputs[s] = dxh;
        }
        dinputs
    }

    fn forward(
        &self,
        params: &[f64],
        window: &Window,
        dropout: f64,
        rng: Option<&mut Rng>,
    ) -> ForwardCache {
        let lay = self.layout();
        let h = self.width;
        let n = window.len;
        let mut rng = rng;
        let mut mask = |len: usize| match rng.as_deref_mut() {
            Some(r) if dropout > 0.0 => dropout_mask(len, dropout, r),
            _ => vec![1.0; len],
        };
        let mut inputs: Vec<Vec<f64>> = (0..n).map(|t| window.step(t).to_vec()).collect();
        let mut layers = Vec::with_capacity(self.layers);
        for (l, pair) in lay.cells.iter().enumerate() {
            let fwd = self.run_direction(params, pair[0], &inputs, false);
            let bwd = self.run_direction(params, pair[1], &inputs, true);
            // the top layer is only dropped at the read-out
            let masks: Vec<Vec<f64>> = if l + 1 < self.layers {
                (0..n).map(|_| mask(2 * h)).collect()
            } else {
                vec![vec![1.0; 2 * h]; n]
            };
            inputs = (0..n)
                .map(|t| {
                    let mut o = fwd.h[t].clone();
                    o.extend_from_slice(&bwd.h[n - 1 - t]);
                    o.iter_mut().zip(&masks[t]).for_each(|(v, m)| *v *= m);
                    o
                })
                .collect();
            layers.push(LayerCache {
                dirs: [fwd, bwd],
                masks,
            });
        }
        let mut readout = inputs[n - 1][..h].to_vec();
        readout.extend_from_slice(&inputs[0][h..]);
        let readout_mask = mask(2 * h);
        readout
            .iter_mut()
            .zip(&readout_mask)
            .for_each(|(v, m)| *v *= m);
        let mut fc_pre = vec![0.0; self.fc_width];
        affine(
            &params[lay.fc_w..lay.fc_b],
            &params[lay.fc_b..lay.out_w],
            &readout,
            &mut fc_pre,
        );
        let fc_act: Vec<f64> = fc_pre.iter().map(|&v| elu(v)).collect();
        let mut logits = [0.0; 2];
        affine(
            &params[lay.out_w..lay.out_b],
            &params[lay.out_b..lay.total],
            &fc_act,
            &mut logits,
        );
        ForwardCache {
            layers,
            readout,
            readout_mask,
            fc_pre,
            fc_act,
            logits,
        }
    }

    fn backward(
        &self,
        params: &[f64],
        window: &Window,
        cache: &ForwardCache,
        dlogits: [f64; 2],
        grad: &mut [f64],
    ) {
        let lay = self.layout();
        let h = self.width;
        let n = window.len;
        let mut dfc = vec![0.0; self.fc_width];
        {
            let (gw, rest) = grad.split_at_mut(lay.out_b);
            affine_backward(
                &params[lay.out_w..lay.out_b],
                &cache.fc_act,
                &dlogits,
                &mut gw[lay.out_w..],
                &mut rest[..2],
                Some(&mut dfc),
            );
        }
        for (d, z) in dfc.iter_mut().zip(&cache.fc_pre) {
            *d *= elu_grad(*z);
        }
        let mut dread = vec![0.0; 2 * h];
        {
            let (gw, rest) = grad.split_at_mut(lay.fc_b);
            affine_backward(
                &params[lay.fc_w..lay.fc_b],
                &cache.readout,
                &dfc,
                &mut gw[lay.fc_w..],
                &mut rest[..self.fc_width],
                Some(&mut dread),
            );
        }
        // gradient w.r.t. each layer's (masked) concatenated outputs, by time
        let mut dout: Vec<Vec<f64>> = vec![vec![0.0; 2 * h]; n];
        for j in 0..2 * h {
            let d = dread[j] * cache.readout_mask[j];
            if j < h {
                dout[n - 1][j] += d;
            } else {
                dout[0][j] += d;
            }
        }
        for (l, layer) in cache.layers.iter().enumerate().rev() {
            for (t, d) in dout.iter_mut().enumerate() {
                d.iter_mut().zip(&layer.masks[t]).for_each(|(v, m)| *v *= m);
            }
            let dh_f: Vec<Vec<f64>> = (0..n).map(|s| dout[s][..h].to_vec()).collect();
            let dh_b: Vec<Vec<f64>> = (0..n).map(|s| dout[n - 1 - s][h..].to_vec()).collect();
            let dx_f =
                self.backward_direction(params, lay.cells[l][0], &layer.dirs[0], &dh_f, grad);
            let dx_b =
                self.backward_direction(params, lay.cells[l][1], &layer.dirs[1], &dh_b, grad);
            if l == 0 {
                break;
            }
            dout = (0..n)
                .map(|t| {
                    dx_f[t]
                        .iter()
                        .zip(&dx_b[n - 1 - t])
                        .map(|(a, b)| a + b)
                        .collect()
                })
                .collect();
        }
    }

    /// Pre-soft-max outputs `[off, on]` at inference.
    pub fn logits(&self, params: &[f64], window: &Window) -> [f64; 2] {
        self.forward(params, window, 0.0, None).logits
    }

    /// Class-weighted soft-max cross-entropy averaged over the batch, and its
    /// gradient. `class_weights[k]` scales the loss of windows labelled `k`.
    pub fn loss_grad(
        &self,
        params: &[f64],
        batch: &[&Window],
        class_weights: [f64; 2],
        dropout: f64,
        rng: &mut Rng,
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for w in batch {
            let cache = self.forward(params, w, dropout, Some(rng));
            let [z0, z1] = cache.logits;
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            let k = usize::from(w.label);
            let cw = class_weights[k];
            loss += cw * (lse - cache.logits[k]) * scale;
            let p = [(z0 - lse).exp(), (z1 - lse).exp()];
            let mut d = [p[0] * cw * scale, p[1] * cw * scale];
            d[k] -= cw * scale;
            self.backward(params, w, &cache, d, &mut grad);
        }
        (loss, grad)
    }

    /// Parameters of the network that reads every window backwards: forward
    /// and backward cells trade places and every consumer of a concatenated
    /// `[forward, backward]` vector has its input halves swapped.
    pub fn mirrored(&self, params: &[f64]) -> Vec<f64> {
        let lay = self.layout();
        let h = self.width;
        let mut out = params.to_vec();
        let swap_halves =
            |dst: &mut [f64], src: &[f64], rows: usize, cols: usize, offset: usize| {
                // swaps column blocks [offset, offset+h) and [offset+h, offset+2h)
                for r in 0..rows {
                    for j in 0..h {
                        dst[r * cols + offset + j] = src[r * cols + offset + h + j];
                        dst[r * cols + offset + h + j] = src[r * cols + offset + j];
                    }
                }
            };
        for (l, pair) in lay.cells.iter().enumerate() {
            let [f, b] = *pair;
            let len = b.w - f.w;
            out[f.w..f.w + len].copy_from_slice(&params[b.w..b.w + len]);
            out[b.w..b.w + len].copy_from_slice(&params[f.w..f.w + len]);
            if l > 0 {
                let cols = f.in_dim + h;
                for cell in [f, b] {
                    let src = out[cell.w..cell.b].to_vec();
                    swap_halves(&mut out[cell.w..cell.b], &src, 4 * h, cols, 0);
                }
            }
        }
        let src = out[lay.fc_w..lay.fc_b].to_vec();
        swap_halves(&mut out[lay.fc_w..lay.fc_b], &src, self.fc_width, 2 * h, 0);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmMeta {
    pub seed: u64,
    pub config: LstmConfig,
    pub class_weights: [f64; 2],
    pub best_epoch: usize,
    pub best_validation_auc: f64,
    pub log: Vec<EpochMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmModel {
    pub version: u32,
    pub arch: BiLstmArch,
    pub params: Vec<f64>,
    pub meta: BiLstmMeta,
}

impl BiLstmModel {
    /// Soft-max probability of the "on" class.
    pub fn predict_window(&self, window: &Window) -> Result<f64> {
        if window.n_cols != self.arch.inputs {
            return Err(Error::ArityMismatch {
                expected: self.arch.inputs,
                found: window.n_cols,
            });
        }
        let [z0, z1] = self.arch.logits(&self.params, window);
        Ok(sigmoid(z1 - z0))
    }

    pub fn predict_windows(&self, windows: &[Window]) -> Result<Vec<f64>> {
        windows.iter().map(|w| self.predict_window(w)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: BiLstmModel = serde_json::from_str(text)?;
        if model.version != LSTM_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported sequence-model format version {}",
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
}

/// Splits window indices into (train, validation): the latest
/// `ceil(fraction * n_k)` windows of each class go to validation.
fn split_by_class(windows: &[Window], fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1] {
        let idx: Vec<usize> = (0..windows.len())
            .filter(|&i| windows[i].label == class)
            .collect();
        if idx.len() < 2 {
            return Err(Error::SingleClass);
        }
        let n_val = ((fraction * idx.len() as f64).ceil() as usize).clamp(1, idx.len() - 1);
        let cut = idx.len() - n_val;
        train.extend_from_slice(&idx[..cut]);
        val.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Trains a stacked bi-directional LSTM classifier on time-ordered windows.
///
/// Classes are re-weighted by `n / (2 n_k)`. The learning rate at epoch `e`
/// (1-based) is `lr * decay^(e - 1)`. After every epoch the validation AUC is
/// measured; training ends after `patience` epochs without improvement or at
/// `max_epochs`, and the weights of the best validation epoch are returned.
pub fn train_bilstm(windows: &[Window], config: &LstmConfig, rng: &mut Rng) -> Result<BiLstmModel> {
    config.validate()?;
    let first = windows.first().ok_or(Error::SingleClass)?;
    if windows
        .iter()
        .any(|w| w.len != first.len || w.n_cols != first.n_cols)
    {
        return Err(Error::InvalidConfig("windows must share one shape".into()));
    }
    let (train, val) = split_by_class(windows, config.validation_fraction)?;
    let seed = rng.next_u64();
    let mut local = seeded_rng(seed);
    let arch = BiLstmArch {
        inputs: first.n_cols,
        width: config.width,
        layers: config.layers,
        fc_width: config.fc_width,
    };
    let mut params = arch.init(&mut local);
    let n_on = train.iter().filter(|&&i| windows[i].label == 1).count() as f64;
    let n = train.len() as f64;
    let class_weights = [n / (2.0 * (n - n_on)), n / (2.0 * n_on)];
    let val_labels: Vec<u8> = val.iter().map(|&i| windows[i].label).collect();
    let batch_size = config.effective_batch_size();
    let mut opt = Nesterov::new(params.len(), config.momentum);
    let mut order = train.clone();
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut log = Vec::new();
    let mut stale = 0usize;
    for epoch in 1..=config.max_epochs {
        let lr = config.learning_rate * config.decay.powi(epoch as i32 - 1);
        order.shuffle(&mut local);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &windows[i]).collect();
            let (loss, mut grad) =
                arch.loss_grad(&params, &batch, class_weights, config.dropout, &mut local);
            check_finite(loss, epoch)?;
            if let Some(max) = config.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            opt.step(&mut params, &grad, lr);
            total += loss * chunk.len() as f64;
        }
        let loss = total / n;
        check_finite(loss, epoch)?;
        let scores: Vec<f64> = val
            .iter()
            .map(|&i| {
                let [z0, z1] = arch.logits(&params, &windows[i]);
                sigmoid(z1 - z0)
            })
            .collect();
        let auc = roc_auc(&scores, &val_labels)?.auc;
        log.push(EpochMetrics {
            epoch,
            loss,
            validation_auc: Some(auc),
            learning_rate: lr,
        });
        if auc > best.0 {
            best = (auc, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_auc, best_epoch, best_params) = best;
    Ok(BiLstmModel {
        version: LSTM_FORMAT_VERSION,
        arch,
        params: best_params,
        meta: BiLstmMeta {
            seed,
            config: config.clone(),
            class_weights,
            best_epoch,
            best_validation_auc: best_auc,
            log,
        },
    })
}
