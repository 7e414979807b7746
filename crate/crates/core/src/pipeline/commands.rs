//! The remaining command-level stages: simulation, ingestion, baselines,
//! feature export, model explanation, generative modelling and reporting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, DataSource, RunConfig};
use super::run::{
    game_config, load_table, mode_name, pooling_spec, prepare, resources, restrict_occupants,
    write_stamped, Artifacts,
};
use crate::data::{
    compute_baselines, daily_usage_totals, split_periods, write_minutes, Calendar, MinuteTable,
    OptionalColumn, Resource,
};
use crate::deep::{train_vae, vae_sample, write_metrics_log};
use crate::error::{Error, Result};
use crate::eval::{dtw_permutation_test, two_sample_ttest};
use crate::explain::{
    granger_select_lag, granger_test, neighborhood_glasso, stratify_players, write_granger_table,
    DependenceGraph,
};
use crate::features::{mrmr_select, pool_features, ColumnMeta, ColumnTag, FeatureMatrix, Scaler};
use crate::seeded_rng;
use crate::sim::bayes_optimal_auc;

fn calendar(cfg: &RunConfig) -> Calendar {
    match &cfg.data {
        DataSource::Simulate(sim) => sim.exogenous.calendar.clone(),
        DataSource::Csv { .. } => game_config(cfg)
            .map(|g| g.calendar.clone())
            .unwrap_or_default(),
    }
}

fn minutes_csv(table: &MinuteTable, cfg: &RunConfig) -> Result<Vec<u8>> {
    let delimiter = match &cfg.data {
        DataSource::Csv { ingest, .. } => ingest.delimiter,
        DataSource::Simulate(_) => ',',
    };
    let mut buf = Vec::new();
    write_minutes(table, &mut buf, delimiter)?;
    Ok(buf)
}

/// Simulates the configured cohort and writes the minute table plus the
/// Bayes-optimal AUC of every (occupant, resource).
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<MinuteTable> {
    let DataSource::Simulate(sim) = &cfg.data else {
        return Err(Error::InvalidConfig(
            "`simulate` needs `data.source = \"simulate\"`".into(),
        ));
    };
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("simulate"))?;
    art.write("minutes.csv", &minutes_csv(&table, cfg)?)?;
    let mut truth = String::from("config_hash,seed,occupant,resource,bayes_optimal_auc\n");
    for p in &sim.profiles {
        if !table.occupants().contains(&p.occupant_id.as_str()) {
            continue;
        }
        for r in &p.resources {
            let auc = match bayes_optimal_auc(p, &sim.exogenous, &table, r.resource) {
                Ok(a) => a.to_string(),
                Err(Error::DegenerateLabels) => "-".into(),
                Err(e) => return Err(e.in_stage("truth")),
            };
            truth.push_str(&format!(
                "{},{},{},{},{auc}\n",
                art.config_hash, art.seed, p.occupant_id, r.resource
            ));
        }
    }
    art.write("truth.csv", truth.as_bytes())?;
    Ok(table)
}

/// Reads and validates the configured source, then writes it back in the
/// canonical layout with its schema.
pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<MinuteTable> {
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("ingest"))?;
    table
        .check_usage_invariants()
        .map_err(|e| e.in_stage("ingest"))?;
    art.write("minutes.csv", &minutes_csv(&table, cfg)?)?;
    art.write(
        "schema.json",
        serde_json::to_string_pretty(table.schema())?.as_bytes(),
    )?;
    Ok(table)
}

/// Before/after comparison of daily usage for one resource.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageComparison {
    pub resource: Resource,
    pub test: crate::eval::StatTestResult,
}

/// Pre-game baselines per occupant and Welch tests of daily usage before
/// versus after the pre-game window, per resource.
pub fn baseline(cfg: &RunConfig, out: &Path) -> Result<Vec<UsageComparison>> {
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("load"))?;
    let pre_game = match cfg.split.pre_game {
        Some(r) => r,
        None => {
            cfg.split
                .resolve(&table)
                .map_err(|e| e.in_stage("split"))?
                .0
        }
    };
    let cal = calendar(cfg);
    let baselines =
        compute_baselines(&table, &pre_game, &cal).map_err(|e| e.in_stage("baseline"))?;
    let mut text = String::from("config_hash,seed,occupant,resource,weekday,weekend\n");
    for (occupant, per_res) in &baselines {
        for (res, b) in per_res {
            text.push_str(&format!(
                "{},{},{occupant},{res},{},{}\n",
                art.config_hash, art.seed, b.weekday, b.weekend
            ));
        }
    }
    art.write("baselines.csv", text.as_bytes())?;

    let mut before: BTreeMap<Resource, Vec<f64>> = BTreeMap::new();
    let mut after: BTreeMap<Resource, Vec<f64>> = BTreeMap::new();
    for ((_, date), totals) in daily_usage_totals(&table) {
        let side = if pre_game.contains(date) {
            &mut before
        } else {
            &mut after
        };
        for (res, total) in totals {
            side.entry(res).or_default().push(total);
        }
    }
    let mut rows = Vec::new();
    let mut text = String::from("config_hash,seed,resource,mean_before,mean_after,delta_percent,t,df,p_value,n_before,n_after\n");
    for res in &table.schema().resources {
        let (Some(b), Some(a)) = (before.get(res), after.get(res)) else {
            continue;
        };
        match two_sample_ttest(b, a) {
            Ok(t) => {
                let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
                text.push_str(&format!(
                    "{},{},{res},{},{},{},{},{},{},{},{}\n",
                    art.config_hash,
                    art.seed,
                    t.mean_before,
                    t.mean_after,
                    opt(t.delta_percent),
                    t.statistic,
                    opt(t.df),
                    t.p_value,
                    t.n_before,
                    t.n_after
                ));
                rows.push(UsageComparison {
                    resource: *res,
                    test: t,
                });
            }
            Err(e) => warn!("skipping before/after test for {res}: {e}"),
        }
    }
    art.write("usage_ttest.csv", text.as_bytes())?;
    Ok(rows)
}

/// Writes the standardized, selected train and test designs of every
/// (resource, mode).
pub fn features(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("load"))?;
    let (tr, te) = cfg.split.resolve(&table).map_err(|e| e.in_stage("split"))?;
    let (train, test) = split_periods(&table, &tr, &te).map_err(|e| e.in_stage("split"))?;
    for resource in resources(cfg, &table) {
        for &mode in &cfg.experiment.modes {
            let tag = format!("{resource}_{}", mode_name(mode));
            let data = prepare(cfg, &train, &test, resource, mode)?;
            for (name, m, y) in [
                ("train", &data.train, &data.y_train),
                ("test", &data.test, &data.y_test),
            ] {
                let mut buf = Vec::new();
                m.clone().with_target(y.clone())?.write_csv(&mut buf)?;
                art.write(&format!("features/{tag}_{name}.csv"), &buf)?;
            }
            write_stamped(
                &art,
                &format!("features/{tag}.txt"),
                &(data.selected.join("\n") + "\n"),
            )?;
        }
    }
    Ok(())
}

fn zscore_columns(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let (m, _) = m.drop_constant_columns();
    let n = m.n_rows() as f64;
    let cols = (0..m.n_cols())
        .map(|j| {
            let c = m.column(j);
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            c.into_iter().map(|v| (v - mean) / sd).collect()
        })
        .collect();
    // Standardized indicators are no longer 0/1.
    let meta = m
        .columns()
        .iter()
        .map(|c| match c.tag {
            ColumnTag::Dummy => ColumnMeta::new(c.name.clone(), ColumnTag::External),
            _ => c.clone(),
        })
        .collect();
    FeatureMatrix::from_columns(cols, meta, None)
}

/// Dependence graph and Granger table for one occupant's training period.
#[derive(Clone, Debug)]
pub struct OccupantExplanation {
    pub occupant: String,
    pub graph: DependenceGraph,
    pub granger: Vec<(String, String, crate::explain::GrangerResult)>,
}

fn explain_occupant(
    cfg: &RunConfig,
    train: &MinuteTable,
    occupant: &str,
    resource: Resource,
) -> Result<OccupantExplanation> {
    let own = restrict_occupants(train.clone(), &[occupant.to_string()])?;
    let spec = pooling_spec(cfg, resource);
    let pooled = pool_features(&own, &spec, cfg.explain.mode).map_err(|e| e.in_stage("pool"))?;
    let y = pooled.require_target()?.to_vec();
    let (varying, _) = pooled.drop_constant_columns();
    let names: Vec<String> = if cfg.explain.columns.is_empty() {
        let k = cfg.explain.max_vertices.min(varying.n_cols());
        if k == 0 {
            Vec::new()
        } else {
            mrmr_select(&varying, &y, k, cfg.experiment.features.mrmr_bins)
                .map_err(|e| e.in_stage("select"))?
                .into_iter()
                .map(|j| varying.columns()[j].name.clone())
                .collect()
        }
    } else {
        cfg.explain.columns.clone()
    };
    let selected = pooled
        .select_names(&names)
        .map_err(|e| e.in_stage("select"))?;
    let state: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let state_name = format!("state_{resource}");
    let mut cols: Vec<Vec<f64>> = (0..selected.n_cols()).map(|j| selected.column(j)).collect();
    cols.push(state.clone());
    let mut meta = selected.columns().to_vec();
    meta.push(ColumnMeta::new(state_name.clone(), ColumnTag::Resource));
    let graph_input = zscore_columns(&FeatureMatrix::from_columns(cols, meta, None)?)?;
    let graph =
        neighborhood_glasso(&graph_input, &cfg.explain.glasso).map_err(|e| e.in_stage("glasso"))?;

    let mut granger = Vec::new();
    for (j, meta) in selected.columns().iter().enumerate() {
        if meta.tag == ColumnTag::Dummy {
            continue;
        }
        let x = selected.column(j);
        let outcome = granger_select_lag(&x, &state, cfg.explain.granger_max_lag)
            .and_then(|lag| granger_test(&x, &state, lag, cfg.explain.alpha));
        match outcome {
            Ok(r) => granger.push((meta.name.clone(), state_name.clone(), r)),
            Err(e) => warn!(
                "granger test {} -> {state_name} for {occupant} skipped: {e}",
                meta.name
            ),
        }
    }
    Ok(OccupantExplanation {
        occupant: occupant.to_string(),
        graph,
        granger,
    })
}

/// Final rank of every occupant that has one.
fn final_ranks(table: &MinuteTable) -> BTreeMap<String, u32> {
    let mut out = BTreeMap::new();
    for (id, rows) in table.by_occupant() {
        if let Some(rank) = rows.iter().rev().find_map(|r| r.rank) {
            out.insert(id.to_string(), rank);
        }
    }
    out
}

/// Stratifies players by final rank and explains each class representative,
/// or the first occupant when stratification is not possible.
pub fn explain(cfg: &RunConfig, out: &Path) -> Result<Vec<OccupantExplanation>> {
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("load"))?;
    let (tr, te) = cfg.split.resolve(&table).map_err(|e| e.in_stage("split"))?;
    let (train, _) = split_periods(&table, &tr, &te).map_err(|e| e.in_stage("split"))?;
    let resource = match cfg.explain.resource {
        Some(r) => r,
        None => *resources(cfg, &table)
            .first()
            .ok_or_else(|| Error::InvalidConfig("no resource to explain".into()))?,
    };
    let ranks = final_ranks(&table);
    let targets: Vec<String> = match stratify_players(&ranks) {
        Ok(classes) => {
            let mut text = String::from("config_hash,seed,class,occupant,rank,representative\n");
            for c in &classes {
                let class = serde_json::to_value(c.class)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                for (id, rank) in &c.members {
                    text.push_str(&format!(
                        "{},{},{class},{id},{rank},{}\n",
                        art.config_hash,
                        art.seed,
                        u8::from(*id == c.representative)
                    ));
                }
            }
            art.write("explain/classes.csv", text.as_bytes())?;
            classes.iter().map(|c| c.representative.clone()).collect()
        }
        Err(e) => {
            warn!("no stratification: {e}");
            table
                .occupants()
                .first()
                .map(|s| vec![s.to_string()])
                .unwrap_or_default()
        }
    };
    let mut results = Vec::new();
    for occupant in targets {
        let ex = explain_occupant(cfg, &train, &occupant, resource)?;
        let mut buf = art.stamp().into_bytes();
        ex.graph.write_edge_list(&mut buf)?;
        art.write(&format!("explain/{occupant}_edges.csv"), &buf)?;
        art.write(
            &format!("explain/{occupant}_graph.json"),
            serde_json::to_string_pretty(&ex.graph)?.as_bytes(),
        )?;
        let mut buf = art.stamp().into_bytes();
        write_granger_table(&ex.granger, &mut buf)?;
        art.write(&format!("explain/{occupant}_granger.csv"), &buf)?;
        results.push(ex);
    }
    Ok(results)
}

/// DTW comparison of one original and generated column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFeature {
    pub feature: String,
    pub dtw: f64,
    pub p_value: f64,
}

/// Raw per-minute device states and climate readings of one occupant.
fn series_matrix(table: &MinuteTable, max_len: usize) -> Result<FeatureMatrix> {
    let rows: Vec<_> = table.records().iter().take(max_len).collect();
    let schema = table.schema();
    let mut cols = Vec::new();
    let mut meta = Vec::new();
    for &res in &schema.resources {
        cols.push(
            rows.iter()
                .map(|r| f64::from(u8::from(r.state(res))))
                .collect(),
        );
        meta.push(ColumnMeta::new(format!("state_{res}"), ColumnTag::Dummy));
    }
    let optional: [(
        OptionalColumn,
        ColumnTag,
        fn(&crate::data::MinuteRecord) -> Option<f64>,
    ); 4] = [
        (OptionalColumn::IndoorTemperature, ColumnTag::Iot, |r| {
            r.indoor.temperature
        }),
        (OptionalColumn::IndoorHumidity, ColumnTag::Iot, |r| {
            r.indoor.humidity
        }),
        (OptionalColumn::ExtTemperature, ColumnTag::External, |r| {
            r.external.temperature
        }),
        (OptionalColumn::ExtHumidity, ColumnTag::External, |r| {
            r.external.humidity
        }),
    ];
    for (col, tag, get) in optional {
        if !schema.has(col) {
            continue;
        }
        let values: Option<Vec<f64>> = rows.iter().map(|r| get(r)).collect();
        match values {
            Some(v) => {
                cols.push(v);
                meta.push(ColumnMeta::new(col.name(), tag));
            }
            None => warn!("column {} has gaps and is left out", col.name()),
        }
    }
    FeatureMatrix::from_columns(cols, meta, None)
}

/// Trains the auto-encoder on one occupant's training series, samples as many
/// rows as it saw and scores every column by DTW with a permutation p-value.
pub fn generate(cfg: &RunConfig, out: &Path) -> Result<Vec<GeneratedFeature>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let art = Artifacts::new(cfg, out)?;
    art.write_config(cfg)?;
    let table = load_table(cfg).map_err(|e| e.in_stage("load"))?;
    let (tr, te) = cfg.split.resolve(&table).map_err(|e| e.in_stage("split"))?;
    let (train, _) = split_periods(&table, &tr, &te).map_err(|e| e.in_stage("split"))?;
    let occupant = match &cfg.generate.occupant {
        Some(o) => o.clone(),
        None => train
            .occupants()
            .first()
            .map(|s| s.to_string())
            .ok_or(Error::EmptyTable.in_stage("generate"))?,
    };
    let own = restrict_occupants(train, std::slice::from_ref(&occupant))?;
    let raw = series_matrix(&own, cfg.generate.max_length).map_err(|e| e.in_stage("generate"))?;
    // continuous columns must vary to be standardized; binary ones may not
    let keep: Vec<String> = raw
        .columns()
        .iter()
        .enumerate()
        .filter(|(j, c)| {
            let col = raw.column(*j);
            c.tag == ColumnTag::Dummy || col.iter().any(|v| *v != col[0])
        })
        .map(|(_, c)| c.name.clone())
        .collect();
    let original = raw.select_names(&keep)?;
    let scaler = Scaler::fit(&original).map_err(|e| e.in_stage("standardize"))?;
    let scaled = scaler.transform(&original)?;
    let mut rng = seeded_rng(derive_seed(cfg.seed, "generate/vae"));
    let generator =
        train_vae(&scaled, &cfg.generate.vae, &mut rng).map_err(|e| e.in_stage("train"))?;
    let mut rng = seeded_rng(derive_seed(cfg.seed, "generate/sample"));
    let sampled = vae_sample(&generator, original.n_rows(), &mut rng)?;
    let generated = scaler.inverse(&sampled)?;

    let mut rows = Vec::new();
    let mut text = String::from("config_hash,seed,feature,dtw,p_value\n");
    for (j, c) in original.columns().iter().enumerate() {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &format!("generate/perm/{}", c.name)));
        let t = dtw_permutation_test(
            &original.column(j),
            &generated.column(j),
            cfg.generate.permutations,
            cfg.generate.scheme,
            &mut rng,
        )
        .map_err(|e| e.in_stage("dtw"))?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            art.config_hash, art.seed, c.name, t.statistic, t.p_value
        ));
        rows.push(GeneratedFeature {
            feature: c.name.clone(),
            dtw: t.statistic,
            p_value: t.p_value,
        });
    }
    art.write("generate/dtw_table.csv", text.as_bytes())?;
    for (name, m) in [("original", &original), ("generated", &generated)] {
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        art.write(&format!("generate/{name}.csv"), &buf)?;
    }
    art.write("generate/generator.json", generator.to_json()?.as_bytes())?;
    let mut buf = Vec::new();
    write_metrics_log(&generator.meta.log, &mut buf)?;
    art.write("logs/vae.csv", &buf)?;
    Ok(rows)
}

fn csv_to_markdown(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .collect();
    let Some((head, body)) = lines.split_first() else {
        return String::new();
    };
    let cells = |l: &str| format!("| {} |\n", l.split(',').collect::<Vec<_>>().join(" | "));
    let mut s = cells(head);
    s.push_str(&format!("|{}\n", "---|".repeat(head.split(',').count())));
    for l in body {
        s.push_str(&cells(l));
    }
    s
}

/// Collects the tables found in a run directory into `report.md`.
pub fn report(out: &Path) -> Result<String> {
    let sections = [
        ("AUC (step_ahead / sensor_free)", "auc_table_wide.csv"),
        ("AUC by learner, resource and mode", "auc_table.csv"),
        (
            "Usage before and after the pre-game window",
            "usage_ttest.csv",
        ),
        (
            "Generated series against the original (DTW)",
            "generate/dtw_table.csv",
        ),
        ("Player classes", "explain/classes.csv"),
        ("Ground-truth ceiling", "truth.csv"),
    ];
    let mut md = String::from("# Run report\n");
    let mut found = 0;
    for (title, rel) in sections {
        let path = out.join(rel);
        if let Ok(text) = fs::read_to_string(&path) {
            found += 1;
            md.push_str(&format!("\n## {title}\n\n{}", csv_to_markdown(&text)));
        }
    }
    if found == 0 {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "no result tables under {}; run `evaluate` (or another stage) first",
                out.display()
            ),
        )));
    }
    fs::write(out.join("report.md"), &md)?;
    Ok(md)
}
