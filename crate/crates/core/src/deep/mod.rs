//! Neural sequence and tabular models trained with hand-written
//! back-propagation over flat `f64` parameter vectors.

mod common;
mod lstm;
mod mlp;
mod vae;

pub use common::{grad_check, make_windows, write_metrics_log, EpochMetrics, Window};
pub use lstm::{
    train_bilstm, BiLstmArch, BiLstmMeta, BiLstmModel, LstmConfig, LSTM_FORMAT_VERSION,
};
pub use mlp::{
    train_mlp, BatchNormStats, MlpArch, MlpConfig, MlpMeta, MlpModel, MLP_FORMAT_VERSION,
};
pub use vae::{
    gaussian_kl, train_vae, vae_sample, BinarySampling, Generator, Likelihood, VaeArch, VaeConfig,
    VaeLoss, VaeMeta, VAE_FORMAT_VERSION,
};
