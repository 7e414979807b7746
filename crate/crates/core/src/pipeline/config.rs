use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DateRange, GameConfig, IngestOptions, MinuteTable, Resource, SchemaMapping};
use crate::deep::{LstmConfig, MlpConfig, VaeConfig};
use crate::error::{Error, Result};
use crate::eval::PermutationScheme;
use crate::explain::GlassoConfig;
use crate::features::{DummyGroup, FeatureMode};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::sim::{ExogenousModel, OccupantProfile};

/// Environment variable that relocates relative data paths.
pub const DATA_DIR_ENV: &str = "ECOGAME_DATA_DIR";
/// Environment variable that overrides the global seed.
pub const SEED_ENV: &str = "ECOGAME_SEED";

/// Any classifier the pipeline can train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Baseline(LearnerKind),
    Mlp,
    BiLstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline(k) => k.name(),
            ModelKind::Mlp => "mlp",
            ModelKind::BiLstm => "bilstm",
        }
    }

    pub fn all() -> Vec<ModelKind> {
        let mut v: Vec<ModelKind> = LearnerKind::ALL
            .into_iter()
            .map(ModelKind::Baseline)
            .collect();
        v.extend([ModelKind::Mlp, ModelKind::BiLstm]);
        v
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "bilstm" => Ok(ModelKind::BiLstm),
            other => other.parse::<LearnerKind>().map(ModelKind::Baseline),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.name().to_string()
    }
}

/// A simulated cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub days: usize,
    pub exogenous: ExogenousModel,
    pub game: GameConfig,
    pub profiles: Vec<OccupantProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        /// Column mapping; inferred from canonical header names when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mapping: Option<SchemaMapping>,
        #[serde(default)]
        ingest: IngestOptions,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game: Option<GameConfig>,
    },
    Simulate(SimulationConfig),
}

/// Train and test periods. Missing ranges fall back to a split of the
/// table's distinct dates at `train_fraction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<DateRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<DateRange>,
    pub train_fraction: f64,
    /// Pre-game window for baselines and before/after comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_game: Option<DateRange>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            train_fraction: 0.8,
            pre_game: None,
        }
    }
}

impl SplitConfig {
    pub fn resolve(&self, table: &MinuteTable) -> Result<(DateRange, DateRange)> {
        if let (Some(train), Some(test)) = (self.train, self.test) {
            return Ok((train, test));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "train_fraction must lie in (0, 1)".into(),
            ));
        }
        let mut dates: Vec<NaiveDate> = table.records().iter().map(|r| r.date()).collect();
        dates.sort_unstable();
        dates.dedup();
        if dates.len() < 2 {
            return Err(Error::InvalidConfig(
                "need at least two distinct dates to split".into(),
            ));
        }
        let cut =
            ((dates.len() as f64 * self.train_fraction).round() as usize).clamp(1, dates.len() - 1);
        let train = self
            .train
            .unwrap_or(DateRange::new(dates[0], dates[cut - 1]));
        let test = self
            .test
            .unwrap_or(DateRange::new(dates[cut], dates[dates.len() - 1]));
        Ok((train, test))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub lags: Vec<usize>,
    pub dummies: Vec<DummyGroup>,
    /// Table columns to pool; empty means every present column.
    pub columns: Vec<String>,
    pub mrmr_k: usize,
    pub mrmr_bins: usize,
    pub smote: bool,
    pub smote_neighbors: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lags: vec![1],
            dummies: vec![
                DummyGroup::DayType,
                DummyGroup::TimeOfDay,
                DummyGroup::AcademicPeriod,
            ],
            columns: Vec::new(),
            mrmr_k: crate::features::DEFAULT_SELECTED,
            mrmr_bins: crate::features::DEFAULT_BINS,
            smote: true,
            smote_neighbors: crate::features::DEFAULT_NEIGHBORS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Empty means every resource in the table.
    pub resources: Vec<Resource>,
    pub modes: Vec<FeatureMode>,
    pub learners: Vec<ModelKind>,
    /// Empty means every occupant in the table.
    pub occupants: Vec<String>,
    pub features: FeatureConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            resources: Vec::new(),
            modes: vec![FeatureMode::StepAhead, FeatureMode::SensorFree],
            learners: vec![ModelKind::Baseline(LearnerKind::Logistic)],
            occupants: Vec::new(),
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Resource whose state joins the dependence graph; the first one by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resource: Option<Resource>,
    pub mode: FeatureMode,
    /// Graph vertices besides the state; mRMR picks them when `columns` is empty.
    pub max_vertices: usize,
    pub columns: Vec<String>,
    pub glasso: GlassoConfig,
    pub granger_max_lag: usize,
    pub alpha: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            resource: None,
            mode: FeatureMode::StepAhead,
            max_vertices: 8,
            columns: Vec::new(),
            glasso: GlassoConfig::default(),
            granger_max_lag: 5,
            alpha: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    /// Occupant whose series is modelled; the first one by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupant: Option<String>,
    /// Minutes of the training period used, from its start.
    pub max_length: usize,
    pub permutations: usize,
    pub scheme: PermutationScheme,
    pub vae: VaeConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            occupant: None,
            max_length: 720,
            permutations: 100,
            scheme: PermutationScheme::default(),
            vae: VaeConfig::default(),
        }
    }
}

/// Everything a run depends on besides its input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub lstm: LstmConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let DataSource::Csv { path: data, .. } = &mut cfg.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies the data-directory and seed overrides. A data directory
    /// replaces the directory of the CSV source, keeping its file name.
    pub fn apply_overrides(&mut self, data_dir: Option<&Path>, seed: Option<u64>) {
        if let (Some(dir), DataSource::Csv { path, .. }) = (data_dir, &mut self.data) {
            if let Some(name) = path.file_name() {
                *path = dir.join(name);
            }
        }
        if let Some(seed) = seed {
            self.seed = seed;
        }
    }

    /// Reads both overrides from the environment.
    pub fn apply_env(&mut self) -> Result<()> {
        let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let seed = match std::env::var(SEED_ENV) {
            Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
                Error::InvalidConfig(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))
            })?),
            Err(_) => None,
        };
        self.apply_overrides(dir.as_deref(), seed);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        self.lstm.validate()?;
        self.generate.vae.validate()?;
        if let DataSource::Simulate(sim) = &self.data {
            if sim.days == 0 || sim.profiles.is_empty() {
                return Err(Error::InvalidConfig(
                    "simulation needs at least one day and one profile".into(),
                ));
            }
            sim.game.validate()?;
        }
        if self.experiment.modes.is_empty() || self.experiment.learners.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one mode and one learner are required".into(),
            ));
        }
        if self.experiment.features.mrmr_k == 0 {
            return Err(Error::InvalidConfig("mrmr_k must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 (first 16 characters) of the config without its output
    /// directory, so the same experiment hashes alike wherever it is written.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&c)?);
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}

/// Independent seed for a named sub-task of a run.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

impl RunConfig {
    /// A small simulated cohort: three occupants over eight days starting on a
    /// Saturday, with persistent device use driven by weather and time of day.
    pub fn demo() -> Self {
        use crate::data::DayBaseline;
        use crate::sim::ResourceUtility;

        let start = NaiveDate::from_ymd_opt(2017, 9, 9).expect("valid date");
        let features: Vec<String> = [
            "intercept",
            "ext_temperature",
            "evening",
            "night",
            "weekend",
            "lag1_ceiling_fan",
            "lag1_ceiling_light",
            "lag1_desk_light",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let profiles = (0..3)
            .map(|k| {
                let shift = 0.3 * k as f64;
                OccupantProfile {
                    occupant_id: format!("occ{}", k + 1),
                    features: features.clone(),
                    resources: vec![
                        ResourceUtility::binary(
                            Resource::CeilingFan,
                            vec![-14.2 + shift, 0.4, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0],
                        ),
                        ResourceUtility::binary(
                            Resource::CeilingLight,
                            vec![-3.0 - shift, 0.0, 2.0, -1.0, 0.0, 0.0, 4.0, 0.0],
                        ),
                        ResourceUtility::binary(
                            Resource::DeskLight,
                            vec![-3.5 + shift, 0.0, 1.5, 0.0, -0.5, 0.0, 0.0, 4.5],
                        ),
                    ],
                    gumbel_scale: 1.0,
                    lag_order: 1,
                    portal_visit_rate: 0.002 * (k + 1) as f64,
                }
            })
            .collect();
        let day = |weekday: f64, weekend: f64| DayBaseline { weekday, weekend };
        let game = GameConfig {
            baselines: [
                (Resource::CeilingFan, day(400.0, 450.0)),
                (Resource::CeilingLight, day(300.0, 350.0)),
                (Resource::DeskLight, day(240.0, 260.0)),
            ]
            .into(),
            boosters: [
                (Resource::CeilingFan, 10.0),
                (Resource::CeilingLight, 10.0),
                (Resource::DeskLight, 10.0),
            ]
            .into(),
            pre_game_range: None,
            calendar: Default::default(),
        };
        RunConfig {
            seed: 7,
            output_dir: None,
            data: DataSource::Simulate(SimulationConfig {
                days: 8,
                exogenous: ExogenousModel::tropical(start, 11),
                game,
                profiles,
            }),
            split: SplitConfig {
                train_fraction: 0.75,
                ..SplitConfig::default()
            },
            experiment: ExperimentConfig::default(),
            learner: LearnerConfig::default(),
            mlp: MlpConfig::default(),
            lstm: LstmConfig::default(),
            explain: ExplainConfig::default(),
            generate: GenerateConfig::default(),
        }
    }
}
