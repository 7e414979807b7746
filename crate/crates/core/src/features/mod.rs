//! Feature engineering: pooling minute tables into design matrices,
//! standardization, mutual information, mRMR selection and SMOTE.

mod matrix;
mod mi;
mod mrmr;
mod pooling;
mod scale;
mod smote;

pub use matrix::{ColumnMeta, ColumnTag, FeatureMatrix};
pub use mi::{
    discrete_mutual_information, discretize, entropy, joint_mutual_information, mutual_information,
};
pub use mrmr::{mrmr_select, DEFAULT_BINS, DEFAULT_SELECTED};
pub use pooling::{pool_features, DummyGroup, FeatureMode, PoolingSpec};
pub use scale::{standardize, Scaler};
pub use smote::{smote, DEFAULT_NEIGHBORS};
