//! Model evaluation: ROC/AUC, stratified cross-validation, random search,
//! dynamic time warping with a permutation test, and Welch t-tests.

mod cv;
mod dtw;
mod roc;
mod search;
mod ttest;

pub use cv::{kfold_cv, stratified_folds, CvResult};
pub use dtw::{dtw, dtw_permutation_test, PermutationScheme};
pub use roc::{roc_auc, RocResult};
pub use search::{random_search, ParamDraw, ParamRange, SearchResult, SearchSpace};
pub use ttest::{delta_percent, two_sample_ttest, StatTestResult};
