//! Explanatory analyses: neighborhood-selection graphical lasso, Granger
//! causality and rank-based player stratification.

mod glasso;
mod granger;
mod lasso;
mod stratify;

pub use glasso::{
    lambda_grid, neighborhood_glasso, CombineRule, DependenceGraph, GlassoConfig, GRID_SIZE,
};
pub use granger::{
    granger_min_len, granger_select_lag, granger_test, write_granger_table, GrangerResult,
};
pub use lasso::{lasso_cd, soft_threshold, LassoFit, LassoProblem};
pub use stratify::{stratify_players, EfficiencyClass, PlayerClass};
