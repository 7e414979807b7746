use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, DataSource, ModelKind, RunConfig};
use crate::data::{ingest_minutes, DateRange, GameConfig, MinuteTable, Resource, SchemaMapping};
use crate::deep::{make_windows, train_bilstm, train_mlp, write_metrics_log};
use crate::error::{Error, Result};
use crate::eval::{roc_auc, RocResult};
use crate::features::{
    mrmr_select, pool_features, smote, FeatureMatrix, FeatureMode, PoolingSpec, Scaler,
};
use crate::learners::{predict_proba, train_baseline_classifier};
use crate::seeded_rng;
use crate::sim::simulate_cohort;

/// Output directory of a run plus the stamp every artifact carries.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub root: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl Artifacts {
    pub fn new(cfg: &RunConfig, root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
        })
    }

    /// Creates parent directories and writes `bytes` to `rel`.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        Ok(path)
    }

    /// Comment line identifying the run, for plain-text artifacts.
    pub fn stamp(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    /// Writes the effective config next to the outputs.
    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        let mut text = self.stamp();
        text.push_str(&cfg.to_toml()?);
        self.write("effective_config.toml", text.as_bytes())?;
        Ok(())
    }
}

/// The minute table a config describes, restricted to its occupants.
pub fn load_table(cfg: &RunConfig) -> Result<MinuteTable> {
    let table = match &cfg.data {
        DataSource::Csv {
            path,
            mapping,
            ingest,
            ..
        } => {
            let open = || {
                fs::File::open(path).map_err(|e| {
                    Error::Io(std::io::Error::new(
                        e.kind(),
                        format!("{}: {e}", path.display()),
                    ))
                })
            };
            let mapping = match mapping {
                Some(m) => m.clone(),
                None => {
                    let mut reader = csv::ReaderBuilder::new()
                        .delimiter(u8::try_from(ingest.delimiter).unwrap_or(b','))
                        .from_reader(open()?);
                    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
                    SchemaMapping::infer(&headers)
                }
            };
            ingest_minutes(open()?, &mapping, ingest)?
        }
        DataSource::Simulate(sim) => {
            let mut rng = seeded_rng(derive_seed(cfg.seed, "simulate"));
            simulate_cohort(
                &sim.profiles,
                &sim.exogenous,
                sim.days * 1440,
                &sim.game,
                &mut rng,
            )?
        }
    };
    restrict_occupants(table, &cfg.experiment.occupants)
}

pub(crate) fn restrict_occupants(table: MinuteTable, keep: &[String]) -> Result<MinuteTable> {
    if keep.is_empty() {
        return Ok(table);
    }
    for id in keep {
        if !table.occupants().contains(&id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "occupant `{id}` is not in the data"
            )));
        }
    }
    let schema = table.schema().clone();
    let records = table
        .into_records()
        .into_iter()
        .filter(|r| keep.contains(&r.occupant_id))
        .collect();
    Ok(MinuteTable::from_sorted(records, schema))
}

pub fn game_config(cfg: &RunConfig) -> Option<&GameConfig> {
    match &cfg.data {
        DataSource::Csv { game, .. } => game.as_ref(),
        DataSource::Simulate(sim) => Some(&sim.game),
    }
}

pub fn resources(cfg: &RunConfig, table: &MinuteTable) -> Vec<Resource> {
    if cfg.experiment.resources.is_empty() {
        table.schema().resources.clone()
    } else {
        cfg.experiment.resources.clone()
    }
}

/// Pooling spec for one target under the run's feature settings.
pub fn pooling_spec(cfg: &RunConfig, resource: Resource) -> PoolingSpec {
    let f = &cfg.experiment.features;
    let mut spec = PoolingSpec::new(resource);
    spec.lags = f.lags.clone();
    spec.dummies = f.dummies.clone();
    spec.columns = f.columns.clone();
    if let Some(game) = game_config(cfg) {
        spec.baselines = game.baselines.clone();
        spec.calendar = game.calendar.clone();
    }
    if let DataSource::Simulate(sim) = &cfg.data {
        spec.calendar = sim.exogenous.calendar.clone();
        spec.academic = sim.exogenous.academic.clone();
    }
    spec
}

/// Standardized, feature-selected train and test designs for one target.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: FeatureMatrix,
    pub y_train: Vec<u8>,
    pub test: FeatureMatrix,
    pub y_test: Vec<u8>,
    /// Selected columns in mRMR order.
    pub selected: Vec<String>,
    pub scaler: Scaler,
}

/// Pools both periods, drops columns constant in training, keeps the top
/// mRMR columns of the training period and standardizes with training
/// statistics.
pub fn prepare(
    cfg: &RunConfig,
    train: &MinuteTable,
    test: &MinuteTable,
    resource: Resource,
    mode: FeatureMode,
) -> Result<Prepared> {
    let spec = pooling_spec(cfg, resource);
    let pooled_train = pool_features(train, &spec, mode).map_err(|e| e.in_stage("pool"))?;
    let pooled_test = pool_features(test, &spec, mode).map_err(|e| e.in_stage("pool"))?;
    let y_train = pooled_train.require_target()?.to_vec();
    let y_test = pooled_test.require_target()?.to_vec();
    let (varying, _) = pooled_train.drop_constant_columns();
    if varying.n_cols() == 0 {
        return Err(Error::ConstantColumn("every pooled column".into()).in_stage("select"));
    }
    let f = &cfg.experiment.features;
    let k = f.mrmr_k.min(varying.n_cols());
    let picked =
        mrmr_select(&varying, &y_train, k, f.mrmr_bins).map_err(|e| e.in_stage("select"))?;
    let names: Vec<String> = picked
        .iter()
        .map(|&j| varying.columns()[j].name.clone())
        .collect();
    let train_sel = varying.select_names(&names)?;
    let test_sel = pooled_test
        .select_names(&names)
        .map_err(|e| e.in_stage("select"))?;
    let scaler = Scaler::fit(&train_sel).map_err(|e| e.in_stage("standardize"))?;
    Ok(Prepared {
        train: scaler.transform(&train_sel)?,
        y_train,
        test: scaler.transform(&test_sel)?,
        y_test,
        selected: names,
        scaler,
    })
}

/// One cell of the AUC table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub learner: ModelKind,
    pub resource: Resource,
    pub mode: FeatureMode,
    pub auc: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub test_positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeatures {
    pub resource: Resource,
    pub mode: FeatureMode,
    pub names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub seed: u64,
    pub train: DateRange,
    pub test: DateRange,
    pub rows: Vec<AucRow>,
    pub features: Vec<SelectedFeatures>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Score the test period and write the AUC tables and ROC curves.
    pub evaluate: bool,
    pub save_models: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            evaluate: true,
            save_models: true,
        }
    }
}

pub(crate) fn mode_name(mode: FeatureMode) -> &'static str {
    match mode {
        FeatureMode::StepAhead => "step_ahead",
        FeatureMode::SensorFree => "sensor_free",
    }
}

struct Fitted {
    model_json: String,
    log: Option<Vec<crate::deep::EpochMetrics>>,
    /// Test scores and their labels (windows drop the first rows).
    scored: (Vec<f64>, Vec<u8>),
}

fn fit_one(
    cfg: &RunConfig,
    kind: ModelKind,
    data: &Prepared,
    balanced: &(FeatureMatrix, Vec<u8>),
    label: &str,
) -> Result<Fitted> {
    let mut rng = seeded_rng(derive_seed(cfg.seed, label));
    match kind {
        ModelKind::Baseline(k) => {
            let model =
                train_baseline_classifier(k, &balanced.0, &balanced.1, &cfg.learner, &mut rng)?;
            Ok(Fitted {
                model_json: model.to_json()?,
                log: None,
                scored: (predict_proba(&model, &data.test)?, data.y_test.clone()),
            })
        }
        ModelKind::Mlp => {
            let model = train_mlp(&balanced.0, &balanced.1, &cfg.mlp, &mut rng)?;
            Ok(Fitted {
                model_json: model.to_json()?,
                log: Some(model.meta.log.clone()),
                scored: (model.predict_proba(&data.test)?, data.y_test.clone()),
            })
        }
        ModelKind::BiLstm => {
            let n = cfg.lstm.window;
            let train_w = make_windows(&data.train, &data.y_train, n)?;
            let test_w = make_windows(&data.test, &data.y_test, n)?;
            let model = train_bilstm(&train_w, &cfg.lstm, &mut rng)?;
            let labels = test_w.iter().map(|w| w.label).collect();
            Ok(Fitted {
                model_json: model.to_json()?,
                log: Some(model.meta.log.clone()),
                scored: (model.predict_windows(&test_w)?, labels),
            })
        }
    }
}

/// Runs ingest, pooling, selection, standardization, oversampling, training
/// and held-out evaluation for every (resource, mode, learner) of the config.
///
/// Every sub-task draws from a generator seeded by the run seed and the
/// task's name, so results do not depend on which other tasks are enabled.
pub fn run_pipeline(
    cfg: &RunConfig,
    out: &Path,
    options: PipelineOptions,
) -> Result<PipelineReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("load"))?;
    let (train_range, test_range) = cfg.split.resolve(&table).map_err(|e| e.in_stage("split"))?;
    let (train, test) = crate::data::split_periods(&table, &train_range, &test_range)
        .map_err(|e| e.in_stage("split"))?;

    let mut rows = Vec::new();
    let mut features = Vec::new();
    for resource in resources(cfg, &table) {
        for &mode in &cfg.experiment.modes {
            let tag = format!("{resource}_{}", mode_name(mode));
            let data = prepare(cfg, &train, &test, resource, mode)?;
            let mut list = art.stamp();
            for name in &data.selected {
                list.push_str(name);
                list.push('\n');
            }
            art.write(&format!("features/{tag}.txt"), list.as_bytes())?;
            features.push(SelectedFeatures {
                resource,
                mode,
                names: data.selected.clone(),
            });

            let needs_balance = cfg
                .experiment
                .learners
                .iter()
                .any(|k| *k != ModelKind::BiLstm);
            let balanced = if cfg.experiment.features.smote && needs_balance {
                let mut rng = seeded_rng(derive_seed(cfg.seed, &format!("smote/{tag}")));
                smote(
                    &data.train,
                    &data.y_train,
                    cfg.experiment.features.smote_neighbors,
                    &mut rng,
                )
                .map_err(|e| e.in_stage("smote"))?
            } else {
                (data.train.clone(), data.y_train.clone())
            };

            for &kind in &cfg.experiment.learners {
                let label = format!("{kind}_{tag}");
                let fitted = fit_one(cfg, kind, &data, &balanced, &format!("train/{label}"))
                    .map_err(|e| e.in_stage("train"))?;
                if options.save_models {
                    art.write(
                        &format!("models/{label}.json"),
                        fitted.model_json.as_bytes(),
                    )?;
                }
                if let Some(log) = &fitted.log {
                    let mut buf = Vec::new();
                    write_metrics_log(log, &mut buf)?;
                    art.write(&format!("logs/{label}.csv"), &buf)?;
                }
                if options.evaluate {
                    let (scores, labels) = &fitted.scored;
                    let roc = roc_auc(scores, labels).map_err(|e| e.in_stage("evaluate"))?;
                    if roc.positives == 0 || roc.negatives == 0 {
                        return Err(Error::DegenerateLabels.in_stage("evaluate"));
                    }
                    write_roc(&art, &format!("roc/{label}.csv"), &roc)?;
                    rows.push(AucRow {
                        learner: kind,
                        resource,
                        mode,
                        auc: roc.auc,
                        n_train: data.train.n_rows(),
                        n_test: labels.len(),
                        test_positives: roc.positives,
                    });
                }
            }
        }
    }

    let report = PipelineReport {
        config_hash: art.config_hash.clone(),
        seed: cfg.seed,
        train: train_range,
        test: test_range,
        rows,
        features,
    };
    if options.evaluate {
        art.write("auc_table.csv", auc_table_long(&report).as_bytes())?;
        art.write(
            "auc_table_wide.csv",
            auc_table_wide(&report, cfg).as_bytes(),
        )?;
    }
    art.write(
        "summary.json",
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}

fn write_roc(art: &Artifacts, rel: &str, roc: &RocResult) -> Result<()> {
    let mut buf = art.stamp().into_bytes();
    roc.write_csv(&mut buf)?;
    art.write(rel, &buf)?;
    Ok(())
}

/// One line per (learner, resource, mode).
pub fn auc_table_long(report: &PipelineReport) -> String {
    let mut s =
        String::from("config_hash,seed,learner,resource,mode,auc,n_train,n_test,test_positives\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            report.config_hash,
            report.seed,
            r.learner,
            r.resource,
            mode_name(r.mode),
            r.auc,
            r.n_train,
            r.n_test,
            r.test_positives
        ));
    }
    s
}

/// Learners as rows and resources as columns; each cell reads
/// `step_ahead / sensor_free` with `-` for a mode that was not run.
pub fn auc_table_wide(report: &PipelineReport, cfg: &RunConfig) -> String {
    let mut resources: Vec<Resource> = Vec::new();
    for r in &report.rows {
        if !resources.contains(&r.resource) {
            resources.push(r.resource);
        }
    }
    let cell: BTreeMap<(ModelKind, Resource, FeatureMode), f64> = report
        .rows
        .iter()
        .map(|r| ((r.learner, r.resource, r.mode), r.auc))
        .collect();
    let mut s = String::from("config_hash,seed,learner");
    for r in &resources {
        s.push(',');
        s.push_str(r.name());
    }
    s.push('\n');
    let fmt = |v: Option<&f64>| v.map_or("-".to_string(), |a| format!("{a:.4}"));
    for &kind in &cfg.experiment.learners {
        s.push_str(&format!("{},{},{}", report.config_hash, report.seed, kind));
        for &res in &resources {
            let step = fmt(cell.get(&(kind, res, FeatureMode::StepAhead)));
            let free = fmt(cell.get(&(kind, res, FeatureMode::SensorFree)));
            s.push_str(&format!(",{step} / {free}"));
        }
        s.push('\n');
    }
    s
}

/// Writes `text` preceded by the run stamp.
pub(crate) fn write_stamped(art: &Artifacts, rel: &str, text: &str) -> Result<PathBuf> {
    let mut buf = art.stamp();
    buf.push_str(text);
    art.write(rel, buf.as_bytes())
}
