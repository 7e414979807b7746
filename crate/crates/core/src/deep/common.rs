use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::Rng;

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of ELU given its input.
pub(crate) fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// `out = W x + b` for row-major `W` of shape `rows x cols`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// Accumulates `dW += d x^T`, `db += d` and `dx += W^T d`.
pub(crate) fn affine_backward(
    w: &[f64],
    x: &[f64],
    d: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let cols = x.len();
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        db[r] += dr;
        for (g, xc) in dw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g += dr * xc;
        }
    }
    if let Some(dx) = dx {
        for (r, &dr) in d.iter().enumerate() {
            if dr == 0.0 {
                continue;
            }
            for (g, wc) in dx.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *g += dr * wc;
            }
        }
    }
}

/// He-normal weights `N(0, 2 / fan_in)`.
pub(crate) fn he_init(out: &mut [f64], fan_in: usize, rng: &mut Rng) {
    let sd = (2.0 / fan_in.max(1) as f64).sqrt();
    for w in out {
        let z: f64 = StandardNormal.sample(rng);
        *w = sd * z;
    }
}

/// Inverted-dropout mask: kept units are scaled by `1 / (1 - p)`.
pub(crate) fn dropout_mask(len: usize, p: f64, rng: &mut Rng) -> Vec<f64> {
    use rand::Rng as _;
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Nesterov-momentum SGD: `v = mu v + g`, `theta -= lr (g + mu v)`.
#[derive(Clone, Debug)]
pub(crate) struct Nesterov {
    velocity: Vec<f64>,
    momentum: f64,
}

impl Nesterov {
    pub fn new(len: usize, momentum: f64) -> Self {
        Self {
            velocity: vec![0.0; len],
            momentum,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= lr * (g + self.momentum * *v);
        }
    }
}

/// One row of the per-epoch training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub validation_auc: Option<f64>,
    pub learning_rate: f64,
}

pub fn write_metrics_log<W: std::io::Write>(log: &[EpochMetrics], mut sink: W) -> Result<()> {
    writeln!(sink, "epoch,loss,validation_auc,learning_rate")?;
    for m in log {
        let auc = m.validation_auc.map_or(String::new(), |a| a.to_string());
        writeln!(sink, "{},{},{},{}", m.epoch, m.loss, auc, m.learning_rate)?;
    }
    Ok(())
}

pub(crate) fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch })
    }
}

/// A sliding window of consecutive rows, labelled by its final row.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// Row-major `len x n_cols`.
    pub values: Vec<f64>,
    pub len: usize,
    pub n_cols: usize,
    pub label: u8,
    /// Index of the final row in the source matrix.
    pub end: usize,
}

impl Window {
    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_cols..(t + 1) * self.n_cols]
    }
}

/// All windows of `len` consecutive rows; window `k` ends at row `k + len - 1`
/// and takes that row's label.
pub fn make_windows(x: &FeatureMatrix, y: &[u8], len: usize) -> Result<Vec<Window>> {
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    if len == 0 || x.n_rows() < len {
        return Err(Error::TooFewRows {
            rows: x.n_rows(),
            needed: len.max(1),
        });
    }
    let p = x.n_cols();
    Ok((len - 1..x.n_rows())
        .map(|end| Window {
            values: x.values()[(end + 1 - len) * p..(end + 1) * p].to_vec(),
            len,
            n_cols: p,
            label: u8::from(y[end] != 0),
            end,
        })
        .collect())
}

/// Largest relative error between `loss_grad`'s analytic gradient and central
/// differences `(L(theta + eps e_i) - L(theta - eps e_i)) / (2 eps)`.
///
/// The relative error of one coordinate is `|a - n| / max(|a|, |n|, 1e-6)`.
/// When `max_params` is given, that many coordinates are sampled with `rng`.
pub fn grad_check<F>(
    params: &[f64],
    loss_grad: F,
    epsilon: f64,
    max_params: Option<usize>,
    rng: &mut Rng,
) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_grad(params);
    let indices: Vec<usize> = match max_params {
        Some(m) if m < params.len() => {
            let mut v = sample(rng, params.len(), m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..params.len()).collect(),
    };
    let mut theta = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in indices {
        let orig = theta[i];
        theta[i] = orig + epsilon;
        let plus = loss_grad(&theta).0;
        theta[i] = orig - epsilon;
        let minus = loss_grad(&theta).0;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnMeta, ColumnTag};
    use crate::seeded_rng;

    #[test]
    fn window_count_and_alignment() {
        let cols = vec![
            (0..10).map(f64::from).collect(),
            (0..10).map(|v| f64::from(v) * 10.0).collect(),
        ];
        let meta = vec![
            ColumnMeta::new("a", ColumnTag::External),
            ColumnMeta::new("b", ColumnTag::External),
        ];
        let x = FeatureMatrix::from_columns(cols, meta, None).unwrap();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 0)).collect();
        let w = make_windows(&x, &y, 4).unwrap();
        assert_eq!(w.len(), 7);
        for win in &w {
            assert_eq!(win.step(3), x.row(win.end));
            assert_eq!(win.label, y[win.end]);
        }
        assert!(matches!(
            make_windows(&x, &y, 11),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn default_window_length_accepted() {
        let cols = vec![(0..130).map(f64::from).collect()];
        let x = FeatureMatrix::from_columns(
            cols,
            vec![ColumnMeta::new("a", ColumnTag::External)],
            None,
        )
        .unwrap();
        assert_eq!(make_windows(&x, &[0; 130], 120).unwrap().len(), 11);
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        // L(w) = 0.5 ||X w - y||^2 / n
        let x = [1.0, 2.0, -1.0, 0.5, 3.0, 1.0];
        let y = [0.5, -1.0, 2.0];
        let f = |w: &[f64]| {
            let mut loss = 0.0;
            let mut g = vec![0.0; 2];
            for i in 0..3 {
                let r = x[2 * i] * w[0] + x[2 * i + 1] * w[1] - y[i];
                loss += 0.5 * r * r / 3.0;
                g[0] += r * x[2 * i] / 3.0;
                g[1] += r * x[2 * i + 1] / 3.0;
            }
            (loss, g)
        };
        assert!(grad_check(&[0.3, -0.7], f, 1e-5, None, &mut seeded_rng(1)) < 1e-9);
    }
}
