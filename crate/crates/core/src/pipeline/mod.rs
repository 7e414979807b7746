//! Reproducible runs: configuration, the end-to-end evaluation pipeline and
//! the individual command stages. Every artifact carries the config hash and
//! seed, and each run writes its effective configuration next to its outputs.

mod commands;
mod config;
mod run;

pub use commands::{
    baseline, explain, features, generate, ingest, report, simulate, GeneratedFeature,
    OccupantExplanation, UsageComparison,
};
pub use config::{
    derive_seed, DataSource, ExperimentConfig, ExplainConfig, FeatureConfig, GenerateConfig,
    ModelKind, RunConfig, SimulationConfig, SplitConfig, DATA_DIR_ENV, SEED_ENV,
};
pub use run::{
    auc_table_long, auc_table_wide, load_table, prepare, run_pipeline, Artifacts, AucRow,
    PipelineOptions, PipelineReport, Prepared, SelectedFeatures,
};
