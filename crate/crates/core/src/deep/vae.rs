use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::common::{
    affine, affine_backward, check_finite, elu, elu_grad, he_init, EpochMetrics, Nesterov,
};
use crate::error::{Error, Result};
use crate::features::{ColumnMeta, ColumnTag, FeatureMatrix};
use crate::stats::{sigmoid, softplus};
use crate::{seeded_rng, Rng};

pub const VAE_FORMAT_VERSION: u32 = 1;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-column reconstruction likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    Bernoulli,
    /// Normal with a learned per-column log-variance.
    Gaussian,
}

/// How binary columns are produced when sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarySampling {
    /// Draw from the decoded Bernoulli probability.
    #[default]
    Sample,
    /// Emit 1 when the decoded probability is at least one half.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub encoder: [usize; 2],
    pub decoder: [usize; 2],
    pub latent: usize,
    /// Explicit likelihood per column; by default dummy columns and binary
    /// state columns are Bernoulli and everything else Gaussian.
    pub likelihoods: Option<Vec<Likelihood>>,
    pub binary_sampling: BinarySampling,
    /// Add the decoded Gaussian noise to continuous columns when sampling.
    pub gaussian_noise: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Epochs averaged when comparing the final ELBO with the first epoch's.
    pub trailing_window: usize,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            encoder: [32, 16],
            decoder: [16, 32],
            latent: 4,
            likelihoods: None,
            binary_sampling: BinarySampling::Sample,
            gaussian_noise: true,
            epochs: 40,
            batch_size: 64,
            learning_rate: 0.005,
            momentum: 0.9,
            trailing_window: 5,
            seed: 0,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 {
            return Err(Error::InvalidConfig(
                "latent dimension must be at least 1".into(),
            ));
        }
        if self.encoder.contains(&0) || self.decoder.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer sizes must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.trailing_window == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch size and trailing window must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Dense ELU stack with a linear output layer, over a flat parameter slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Dense {
    sizes: Vec<usize>,
}

struct DenseCache {
    /// Inputs to each layer.
    acts: Vec<Vec<f64>>,
    /// Affine outputs of each layer.
    pre: Vec<Vec<f64>>,
}

impl Dense {
    fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let o = (off, off + w[0] * w[1]);
                off = o.1 + w[1];
                o
            })
            .collect()
    }

    fn init(&self, p: &mut [f64], rng: &mut Rng) {
        for (l, (w, b)) in self.offsets().into_iter().enumerate() {
            he_init(&mut p[w..b], self.sizes[l], rng);
        }
    }

    fn forward(&self, p: &[f64], x: &[f64]) -> DenseCache {
        let offs = self.offsets();
        let last = offs.len() - 1;
        let mut cache = DenseCache {
            acts: vec![x.to_vec()],
            pre: Vec::with_capacity(offs.len()),
        };
        for (l, &(w, b)) in offs.iter().enumerate() {
            let mut z = vec![0.0; self.sizes[l + 1]];
            affine(&p[w..b], &p[b..b + z.len()], &cache.acts[l], &mut z);
            if l < last {
                cache.acts.push(z.iter().map(|&v| elu(v)).collect());
            }
            cache.pre.push(z);
        }
        cache
    }

    fn output<'a>(&self, cache: &'a DenseCache) -> &'a [f64] {
        cache.pre.last().expect("non-empty stack")
    }

    /// Accumulates parameter gradients into `g` and returns the input gradient.
    fn backward(&self, p: &[f64], cache: &DenseCache, dout: &[f64], g: &mut [f64]) -> Vec<f64> {
        let offs = self.offsets();
        let mut delta = dout.to_vec();
        for l in (0..offs.len()).rev() {
            let (w, b) = offs[l];
            if l < offs.len() - 1 {
                for (d, z) in delta.iter_mut().zip(&cache.pre[l]) {
                    *d *= elu_grad(*z);
                }
            }
            let mut dx = vec![0.0; self.sizes[l]];
            let (gw, rest) = g.split_at_mut(b);
            affine_backward(
                &p[w..b],
                &cache.acts[l],
                &delta,
                &mut gw[w..],
                &mut rest[..delta.len()],
                Some(&mut dx),
            );
            delta = dx;
        }
        delta
    }
}

/// Batch-averaged loss split into its two terms; `total = reconstruction + kl`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// `KL(N(mu, diag(exp(logvar))) || N(0, I))`.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Encoder, decoder and per-column likelihoods. Parameters are laid out as
/// encoder stack, decoder stack, then one log-variance per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeArch {
    encoder: Dense,
    decoder: Dense,
    pub latent: usize,
    pub likelihoods: Vec<Likelihood>,
}

impl VaeArch {
    pub fn new(
        likelihoods: Vec<Likelihood>,
        encoder: [usize; 2],
        decoder: [usize; 2],
        latent: usize,
    ) -> Self {
        let d = likelihoods.len();
        Self {
            encoder: Dense {
                sizes: vec![d, encoder[0], encoder[1], 2 * latent],
            },
            decoder: Dense {
                sizes: vec![latent, decoder[0], decoder[1], d],
            },
            latent,
            likelihoods,
        }
    }

    fn dims(&self) -> usize {
        self.likelihoods.len()
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.n_params() + self.dims()
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (enc, rest) = p.split_at(self.encoder.n_params());
        let (dec, lv) = rest.split_at(self.decoder.n_params());
        (enc, dec, lv)
    }

    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params()];
        let e = self.encoder.n_params();
        let d = self.decoder.n_params();
        self.encoder.init(&mut p[..e], rng);
        self.decoder.init(&mut p[e..e + d], rng);
        p
    }

    /// Encoder output `(mu, logvar)` for one row.
    pub fn encode(&self, params: &[f64], row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (enc, _, _) = self.split(params);
        let cache = self.encoder.forward(enc, row);
        let out = self.encoder.output(&cache);
        (out[..self.latent].to_vec(), out[self.latent..].to_vec())
    }

    /// Reconstruction negative log-likelihood of `row` under decoder output `out`.
    fn nll(&self, row: &[f64], out: &[f64], logvar: &[f64]) -> f64 {
        self.likelihoods
            .iter()
            .enumerate()
            .map(|(j, lk)| match lk {
                Likelihood::Bernoulli => softplus(out[j]) - row[j] * out[j],
                Likelihood::Gaussian => {
                    0.5 * (LN_2PI + logvar[j] + (row[j] - out[j]).powi(2) * (-logvar[j]).exp())
                }
            })
            .sum()
    }

    /// Batch loss with the given reparameterization noise (`eps[i]` for row `i`)
    /// and its gradient.
    pub fn loss_grad(
        &self,
        params: &[f64],
        rows: &[&[f64]],
        eps: &[Vec<f64>],
    ) -> (VaeLoss, Vec<f64>) {
        let (enc, dec, col_lv) = self.split(params);
        let e_len = enc.len();
        let d_len = dec.len();
        let z_dim = self.latent;
        let scale = 1.0 / rows.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut recon = 0.0;
        let mut kl = 0.0;
        for (row, e) in rows.iter().zip(eps) {
            let ecache = self.encoder.forward(enc, row);
            let eo = self.encoder.output(&ecache);
            let (mu, lv) = eo.split_at(z_dim);
            let z: Vec<f64> = (0..z_dim)
                .map(|k| mu[k] + (0.5 * lv[k]).exp() * e[k])
                .collect();
            let dcache = self.decoder.forward(dec, &z);
            let out = self.decoder.output(&dcache);
            recon += self.nll(row, out, col_lv) * scale;
            kl += gaussian_kl(mu, lv) * scale;

            let mut dout = vec![0.0; self.dims()];
            for (j, lk) in self.likelihoods.iter().enumerate() {
                match lk {
                    Likelihood::Bernoulli => dout[j] = (sigmoid(out[j]) - row[j]) * scale,
                    Likelihood::Gaussian => {
                        let inv = (-col_lv[j]).exp();
                        let r = row[j] - out[j];
                        dout[j] = -r * inv * scale;
                        grad[e_len + d_len + j] += 0.5 * (1.0 - r * r * inv) * scale;
                    }
                }
            }
            let dz = self
                .decoder
                .backward(dec, &dcache, &dout, &mut grad[e_len..e_len + d_len]);
            let mut deo = vec![0.0; 2 * z_dim];
            for k in 0..z_dim {
                let sd = (0.5 * lv[k]).exp();
                deo[k] = dz[k] + mu[k] * scale;
                deo[z_dim + k] = dz[k] * 0.5 * sd * e[k] + 0.5 * (lv[k].exp() - 1.0) * scale;
            }
            self.encoder
                .backward(enc, &ecache, &deo, &mut grad[..e_len]);
        }
        (
            VaeLoss {
                total: recon + kl,
                reconstruction: recon,
                kl,
            },
            grad,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeMeta {
    pub seed: u64,
    pub config: VaeConfig,
    pub log: Vec<EpochMetrics>,
    /// Mean ELBO over the first epoch.
    pub initial_elbo: f64,
    /// Mean ELBO over the last `trailing_window` epochs.
    pub final_elbo: f64,
}

/// A trained variational auto-encoder used as a sampler of synthetic rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub version: u32,
    pub arch: VaeArch,
    pub params: Vec<f64>,
    pub columns: Vec<ColumnMeta>,
    pub meta: VaeMeta,
}

impl Generator {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Generator = serde_json::from_str(text)?;
        if g.version != VAE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported generator format version {}",
                g.version
            )));
        }
        if g.params.len() != g.arch.n_params() || g.columns.len() != g.arch.dims() {
            return Err(Error::Format(
                "generator parameters do not match its architecture".into(),
            ));
        }
        Ok(g)
    }

    /// Whether the final trailing-window ELBO beats the first epoch's.
    pub fn improved(&self) -> bool {
        self.meta.final_elbo > self.meta.initial_elbo
    }
}

fn default_likelihoods(x: &FeatureMatrix) -> Vec<Likelihood> {
    x.columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let binary = x.column(j).iter().all(|&v| v == 0.0 || v == 1.0);
            match c.tag {
                ColumnTag::Dummy => Likelihood::Bernoulli,
                ColumnTag::Resource if binary => Likelihood::Bernoulli,
                _ => Likelihood::Gaussian,
            }
        })
        .collect()
}

/// Fits a variational auto-encoder by mini-batch Nesterov SGD on the negative
/// ELBO, with one reparameterized latent draw per row.
pub fn train_vae(x: &FeatureMatrix, config: &VaeConfig, rng: &mut Rng) -> Result<Generator> {
    config.validate()?;
    if x.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    let likelihoods = match &config.likelihoods {
        Some(l) if l.len() != x.n_cols() => {
            return Err(Error::ArityMismatch {
                expected: x.n_cols(),
                found: l.len(),
            })
        }
        Some(l) => l.clone(),
        None => default_likelihoods(x),
    };
    for (j, lk) in likelihoods.iter().enumerate() {
        if *lk == Likelihood::Bernoulli && x.column(j).iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig(format!(
                "column `{}` is not binary",
                x.names()[j]
            )));
        }
    }
    let seed = rng.next_u64();
    let mut local = seeded_rng(seed);
    let arch = VaeArch::new(likelihoods, config.encoder, config.decoder, config.latent);
    let mut params = arch.init(&mut local);
    let mut opt = Nesterov::new(params.len(), config.momentum);
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut local);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| x.row(i)).collect();
            let eps: Vec<Vec<f64>> = chunk
                .iter()
                .map(|_| {
                    (0..config.latent)
                        .map(|_| StandardNormal.sample(&mut local))
                        .collect()
                })
                .collect();
            let (loss, grad) = arch.loss_grad(&params, &rows, &eps);
            check_finite(loss.total, epoch)?;
            opt.step(&mut params, &grad, config.learning_rate);
            total += loss.total * chunk.len() as f64;
        }
        log.push(EpochMetrics {
            epoch,
            loss: total / x.n_rows() as f64,
            validation_auc: None,
            learning_rate: config.learning_rate,
        });
    }
    let k = config.trailing_window.min(log.len());
    let final_elbo = -log[log.len() - k..].iter().map(|m| m.loss).sum::<f64>() / k as f64;
    Ok(Generator {
        version: VAE_FORMAT_VERSION,
        params,
        columns: x.columns().to_vec(),
        meta: VaeMeta {
            seed,
            config: config.clone(),
            initial_elbo: -log[0].loss,
            final_elbo,
            log,
        },
        arch,
    })
}

/// Decodes `n` standard-normal latent draws into rows with the training columns.
pub fn vae_sample(generator: &Generator, n: usize, rng: &mut Rng) -> Result<FeatureMatrix> {
    use rand::Rng as _;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    let arch = &generator.arch;
    let (_, dec, col_lv) = arch.split(&generator.params);
    let d = arch.dims();
    let cfg = &generator.meta.config;
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z: Vec<f64> = (0..arch.latent)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let cache = arch.decoder.forward(dec, &z);
        let out = arch.decoder.output(&cache);
        for j in 0..d {
            let v = match arch.likelihoods[j] {
                Likelihood::Bernoulli => {
                    let p = sigmoid(out[j]);
                    let on = match cfg.binary_sampling {
                        BinarySampling::Sample => rng.random::<f64>() < p,
                        BinarySampling::Threshold => p >= 0.5,
                    };
                    f64::from(u8::from(on))
                }
                Likelihood::Gaussian if cfg.gaussian_noise => {
                    let e: f64 = StandardNormal.sample(rng);
                    out[j] + (0.5 * col_lv[j]).exp() * e
                }
                Likelihood::Gaussian => out[j],
            };
            values.push(v);
        }
    }
    FeatureMatrix::new(values, generator.columns.clone(), None)
}
