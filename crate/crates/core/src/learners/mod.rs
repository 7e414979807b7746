//! Classical benchmark classifiers with a common trained-model type.

mod lda;
mod logistic;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use tree::{DecisionTree, TreeNode};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::dot;
use crate::stats::sigmoid;
use crate::{seeded_rng, Rng};

/// Version written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    L1Logistic,
    BaggedLogistic,
    Lda,
    Knn,
    LinearSvm,
    Tree,
    RandomForest,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 8] = [
        LearnerKind::Logistic,
        LearnerKind::L1Logistic,
        LearnerKind::BaggedLogistic,
        LearnerKind::Lda,
        LearnerKind::Knn,
        LearnerKind::LinearSvm,
        LearnerKind::Tree,
        LearnerKind::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::L1Logistic => "l1_logistic",
            LearnerKind::BaggedLogistic => "bagged_logistic",
            LearnerKind::Lda => "lda",
            LearnerKind::Knn => "knn",
            LearnerKind::LinearSvm => "linear_svm",
            LearnerKind::Tree => "tree",
            LearnerKind::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown learner `{s}`")))
    }
}

/// Hyperparameters for every learner kind; each kind reads the fields it uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub max_iters: usize,
    /// Gradient infinity-norm tolerance of the convex trainers.
    pub tol: f64,
    /// L1 penalty of `l1_logistic`.
    pub l1: f64,
    /// Ensemble size of `bagged_logistic` and `random_forest`.
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub k_neighbors: usize,
    /// Regularization of the linear SVM.
    pub svm_lambda: f64,
    pub svm_iters: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per forest split; `sqrt(p)` when absent.
    pub max_features: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-6,
            l1: 1e-3,
            n_estimators: 25,
            bootstrap: true,
            k_neighbors: 15,
            svm_lambda: 1e-3,
            svm_iters: 1_000,
            max_depth: 12,
            min_leaf: 5,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearParams {
    fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

/// Learned parameters; linear kinds score with `sigmoid(w.x + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearParams),
    Bagged {
        members: Vec<LinearParams>,
    },
    Knn {
        k: usize,
        rows: Vec<f64>,
        labels: Vec<u8>,
    },
    Tree(DecisionTree),
    Forest {
        trees: Vec<DecisionTree>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Seed of the generator used inside training.
    pub seed: u64,
    pub config: LearnerConfig,
    pub feature_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Final gradient-mapping norm of iterative convex trainers.
    pub final_grad_norm: Option<f64>,
    /// Ridge added to a singular LDA covariance.
    pub ridge: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: LearnerKind,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

impl TrainedModel {
    pub fn arity(&self) -> usize {
        self.meta.feature_names.len()
    }

    /// Turns an unconverged fit into [`Error::NonConvergence`].
    pub fn ensure_converged(&self) -> Result<()> {
        if self.meta.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.meta.iterations,
                residual: self.meta.final_grad_norm.unwrap_or(f64::NAN),
            })
        }
    }

    /// Probability of the positive class for one row of the training arity.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                found: row.len(),
            });
        }
        Ok(match &self.params {
            ModelParams::Linear(l) => sigmoid(l.margin(row)),
            ModelParams::Bagged { members } => {
                members.iter().map(|m| sigmoid(m.margin(row))).sum::<f64>() / members.len() as f64
            }
            ModelParams::Knn { k, rows, labels } => knn_vote(rows, labels, self.arity(), *k, row),
            ModelParams::Tree(t) => t.predict_row(row),
            ModelParams::Forest { trees } => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}

/// Fraction of positives among the `k` nearest stored rows (Euclidean, ties
/// by storage order).
fn knn_vote(rows: &[f64], labels: &[u8], p: usize, k: usize, query: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> = labels
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let r = &rows[i * p..(i + 1) * p];
            (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i)
        })
        .collect();
    let k = k.min(d.len()).max(1);
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d[..k].iter().filter(|(_, i)| labels[*i] != 0).count() as f64 / k as f64
}

/// Probabilities for every row of `x`.
pub fn predict_proba(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.n_cols() != model.arity() {
        return Err(Error::ArityMismatch {
            expected: model.arity(),
            found: x.n_cols(),
        });
    }
    (0..x.n_rows())
        .map(|i| model.predict_row(x.row(i)))
        .collect()
}

/// Trains one classifier. Gradient-based kinds expect standardized inputs.
///
/// Iterative trainers that stop at `max_iters` return the last iterate with
/// `meta.converged == false` and log a warning; callers that need a
/// stationary point use [`TrainedModel::ensure_converged`].
pub fn train_baseline_classifier(
    kind: LearnerKind,
    x: &FeatureMatrix,
    y: &[u8],
    config: &LearnerConfig,
    rng: &mut Rng,
) -> Result<TrainedModel> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    let positives = y.iter().filter(|&&l| l != 0).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    let seed = rng.next_u64();
    let mut inner = seeded_rng(seed);
    let data = x.values();
    let yf: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l != 0))).collect();
    let mut meta = TrainingMeta {
        seed,
        config: config.clone(),
        feature_names: x.names().into_iter().map(String::from).collect(),
        converged: true,
        iterations: 0,
        final_grad_norm: None,
        ridge: None,
    };

    let params = match kind {
        LearnerKind::Logistic | LearnerKind::L1Logistic => {
            let l1 = if kind == LearnerKind::L1Logistic {
                config.l1
            } else {
                0.0
            };
            let fit =
                logistic::fit_logistic(data, n, p, &yf, l1, config.max_iters, config.tol, None);
            meta.converged = fit.converged;
            meta.iterations = fit.iterations;
            meta.final_grad_norm = Some(fit.grad_norm);
            ModelParams::Linear(LinearParams {
                weights: fit.weights,
                bias: fit.bias,
            })
        }
        LearnerKind::BaggedLogistic => {
            let mut members = Vec::with_capacity(config.n_estimators);
            let mut worst: f64 = 0.0;
            for _ in 0..config.n_estimators.max(1) {
                let rows = if config.bootstrap {
                    tree::bootstrap(n, &mut inner)
                } else {
                    (0..n).collect()
                };
                let xs: Vec<f64> = rows
                    .iter()
                    .flat_map(|&r| x.row(r).iter().copied())
                    .collect();
                let ys: Vec<f64> = rows.iter().map(|&r| yf[r]).collect();
                let fit =
                    logistic::fit_logistic(&xs, n, p, &ys, 0.0, config.max_iters, config.tol, None);
                meta.converged &= fit.converged;
                meta.iterations = meta.iterations.max(fit.iterations);
                worst = worst.max(fit.grad_norm);
                members.push(LinearParams {
                    weights: fit.weights,
                    bias: fit.bias,
                });
            }
            meta.final_grad_norm = Some(worst);
            ModelParams::Bagged { members }
        }
        LearnerKind::Lda => {
            let fit = lda::fit_lda(data, n, p, y)?;
            meta.ridge = (fit.ridge > 0.0).then_some(fit.ridge);
            ModelParams::Linear(LinearParams {
                weights: fit.weights,
                bias: fit.bias,
            })
        }
        LearnerKind::Knn => ModelParams::Knn {
            k: config.k_neighbors.max(1),
            rows: data.to_vec(),
            labels: y.iter().map(|&l| u8::from(l != 0)).collect(),
        },
        LearnerKind::LinearSvm => {
            let ys: Vec<f64> = y.iter().map(|&l| if l != 0 { 1.0 } else { -1.0 }).collect();
            let fit = svm::fit_svm(data, n, p, &ys, config.svm_lambda, config.svm_iters);
            meta.iterations = config.svm_iters;
            ModelParams::Linear(LinearParams {
                weights: fit.weights,
                bias: fit.bias,
            })
        }
        LearnerKind::Tree => {
            let params = tree::TreeParams {
                max_depth: config.max_depth,
                min_leaf: config.min_leaf,
                max_features: None,
            };
            ModelParams::Tree(tree::fit_tree(
                data,
                p,
                y,
                &(0..n).collect::<Vec<_>>(),
                &params,
                &mut inner,
            ))
        }
        LearnerKind::RandomForest => {
            let params = tree::TreeParams {
                max_depth: config.max_depth,
                min_leaf: config.min_leaf,
                max_features: Some(
                    config
                        .max_features
                        .unwrap_or(((p as f64).sqrt().floor() as usize).max(1)),
                ),
            };
            let trees = (0..config.n_estimators.max(1))
                .map(|_| {
                    let rows = if config.bootstrap {
                        tree::bootstrap(n, &mut inner)
                    } else {
                        (0..n).collect()
                    };
                    tree::fit_tree(data, p, y, &rows, &params, &mut inner)
                })
                .collect();
            ModelParams::Forest { trees }
        }
    };
    if !meta.converged {
        log::warn!(
            "{kind} stopped after {} iterations with gradient norm {:e}",
            meta.iterations,
            meta.final_grad_norm.unwrap_or(f64::NAN)
        );
    }
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        params,
        meta,
    })
}
