//! Analytics for occupant energy social games.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`data`]: per-minute telemetry tables, ingestion, device-state detection,
//!   baselines, points accounting and period splits.
//! - [`sim`]: a sequential discrete-choice occupant simulator with known
//!   utilities, used as ground truth for the learning stages.
//! - [`features`]: feature pooling, standardization, mutual information, mRMR
//!   selection and SMOTE balancing.
//! - [`learners`]: classical benchmark classifiers.
//! - [`deep`]: feed-forward network, bi-directional LSTM sequence classifier
//!   and a dense variational auto-encoder, all trained from scratch in `f64`.
//! - [`explain`]: neighbourhood graphical lasso, Granger causality and player
//!   stratification.
//! - [`eval`]: ROC/AUC, cross-validation, random search, DTW and t-tests.
//! - [`pipeline`]: run configuration and end-to-end orchestration.

// Negated comparisons deliberately reject NaN along with out-of-range values,
// and the numeric kernels index several parallel arrays in one loop.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod data;
pub mod deep;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod learners;
pub mod pipeline;
pub mod sim;
pub mod stats;

mod linalg;

pub use data::{GameConfig, MinuteRecord, MinuteTable, Resource};
pub use error::{Error, Result};
pub use features::{ColumnMeta, ColumnTag, FeatureMatrix};
pub use learners::{LearnerKind, TrainedModel};

/// Deterministic generator used everywhere a seed is accepted.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's seeded generator.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
