//! Turns a minute table into a design matrix for predicting one device's
//! state at each minute.
//!
//! Calendar dummies and outdoor weather describe the current minute. Room
//! sensors, device history, engagement counters and usage-to-date come from
//! earlier minutes only, so no column leaks the state being predicted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ColumnMeta, ColumnTag, FeatureMatrix};
use crate::data::{Calendar, DayBaseline, MinuteRecord, MinuteTable, OptionalColumn, Resource};
use crate::error::{Error, Result};
use crate::sim::{AcademicCalendar, AcademicPeriod, TimeOfDay};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Every available column, including live room sensors and device history.
    #[default]
    StepAhead,
    /// Only what is known without room sensing: weather, calendar and engagement.
    SensorFree,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step_ahead" | "step-ahead" => Ok(FeatureMode::StepAhead),
            "sensor_free" | "sensor-free" => Ok(FeatureMode::SensorFree),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature mode `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DummyGroup {
    DayType,
    TimeOfDay,
    AcademicPeriod,
}

/// What to pool. Column names in `columns` refer to the table's canonical
/// names (`ext_temperature`, `points_total`, extras, ...); when empty every
/// present column is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub target: Resource,
    /// Lag orders of own device states, applied to every resource in the table.
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default = "all_groups")]
    pub dummies: Vec<DummyGroup>,
    #[serde(default)]
    pub columns: Vec<String>,
    /// Enables `pct_baseline_<resource>` when given.
    #[serde(default)]
    pub baselines: BTreeMap<Resource, DayBaseline>,
    #[serde(default)]
    pub calendar: Calendar,
    #[serde(default)]
    pub academic: AcademicCalendar,
}

fn default_lags() -> Vec<usize> {
    vec![1]
}

fn all_groups() -> Vec<DummyGroup> {
    vec![
        DummyGroup::DayType,
        DummyGroup::TimeOfDay,
        DummyGroup::AcademicPeriod,
    ]
}

impl PoolingSpec {
    pub fn new(target: Resource) -> Self {
        Self {
            target,
            lags: default_lags(),
            dummies: all_groups(),
            columns: Vec::new(),
            baselines: BTreeMap::new(),
            calendar: Calendar::default(),
            academic: AcademicCalendar::default(),
        }
    }
}

/// How a pooled column is read from the current and previous records.
enum Source {
    Dummy(DummyGroup, u8),
    Current(OptionalColumn),
    Previous(OptionalColumn),
    Extra(String),
    Lag(Resource, usize),
    PctBaseline(Resource),
}

fn optional_value(r: &MinuteRecord, c: OptionalColumn) -> Option<f64> {
    match c {
        OptionalColumn::IndoorTemperature => r.indoor.temperature,
        OptionalColumn::IndoorHumidity => r.indoor.humidity,
        OptionalColumn::IndoorIlluminance => r.indoor.illuminance,
        OptionalColumn::ExtTemperature => r.external.temperature,
        OptionalColumn::ExtHumidity => r.external.humidity,
        OptionalColumn::ExtSolarRadiation => r.external.solar_radiation,
        OptionalColumn::PointsTotal => Some(r.points_total),
        OptionalColumn::SurveyPoints => Some(r.survey_points),
        // unranked before the first standings are published
        OptionalColumn::Rank => Some(r.rank.map_or(0.0, f64::from)),
        OptionalColumn::PortalVisits => Some(r.portal_visits_today as f64),
    }
}

fn column_tag(c: OptionalColumn) -> ColumnTag {
    match c {
        OptionalColumn::IndoorTemperature
        | OptionalColumn::IndoorHumidity
        | OptionalColumn::IndoorIlluminance => ColumnTag::Iot,
        OptionalColumn::ExtTemperature
        | OptionalColumn::ExtHumidity
        | OptionalColumn::ExtSolarRadiation => ColumnTag::External,
        _ => ColumnTag::Engagement,
    }
}

const DAY_NAMES: [&str; 2] = ["weekday", "weekend"];
const TIME_NAMES: [&str; 4] = ["night", "morning", "afternoon", "evening"];
const PERIOD_NAMES: [&str; 4] = ["regular", "break", "midterm", "final"];

fn build_sources(
    table: &MinuteTable,
    spec: &PoolingSpec,
    mode: FeatureMode,
) -> Result<Vec<(ColumnMeta, Source)>> {
    let schema = table.schema();
    let mut out = Vec::new();
    for &group in &spec.dummies {
        let names: &[&str] = match group {
            DummyGroup::DayType => &DAY_NAMES,
            DummyGroup::TimeOfDay => &TIME_NAMES,
            DummyGroup::AcademicPeriod => &PERIOD_NAMES,
        };
        for (k, name) in names.iter().enumerate() {
            out.push((
                ColumnMeta::new(*name, ColumnTag::Dummy),
                Source::Dummy(group, k as u8),
            ));
        }
    }

    let wanted: Vec<String> = if spec.columns.is_empty() {
        OptionalColumn::ALL
            .iter()
            .filter(|c| schema.has(**c))
            .map(|c| c.name().to_string())
            .chain(schema.extras.iter().cloned())
            .collect()
    } else {
        spec.columns.clone()
    };
    for name in &wanted {
        if let Some(c) = OptionalColumn::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
        {
            if !schema.has(c) {
                return Err(Error::UnknownColumn(name.clone()));
            }
            let tag = column_tag(c);
            let source = if tag == ColumnTag::External {
                Source::Current(c)
            } else {
                Source::Previous(c)
            };
            out.push((ColumnMeta::new(name.clone(), tag), source));
        } else if schema.extras.iter().any(|e| e == name) {
            out.push((
                ColumnMeta::new(name.clone(), ColumnTag::External),
                Source::Extra(name.clone()),
            ));
        } else {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    if !schema.resources.contains(&spec.target) {
        return Err(Error::UnknownColumn(format!("state_{}", spec.target)));
    }
    for &res in &schema.resources {
        for &k in &spec.lags {
            if k == 0 {
                return Err(Error::InvalidConfig(
                    "lag order 0 would expose the target".into(),
                ));
            }
            out.push((
                ColumnMeta::new(format!("lag{k}_{res}"), ColumnTag::Resource),
                Source::Lag(res, k),
            ));
        }
    }
    for &res in spec.baselines.keys() {
        if schema.resources.contains(&res) {
            out.push((
                ColumnMeta::new(format!("pct_baseline_{res}"), ColumnTag::Resource),
                Source::PctBaseline(res),
            ));
        }
    }

    if mode == FeatureMode::SensorFree {
        out.retain(|(m, _)| !matches!(m.tag, ColumnTag::Iot | ColumnTag::Resource));
    }
    Ok(out)
}

/// Pools features for predicting `spec.target` at every minute that has the
/// full lag history. Histories restart at gaps in an occupant's minutes; the
/// first `max(lags)` minutes after each restart (at least one) are skipped.
pub fn pool_features(
    table: &MinuteTable,
    spec: &PoolingSpec,
    mode: FeatureMode,
) -> Result<FeatureMatrix> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let sources = build_sources(table, spec, mode)?;
    let warmup = spec.lags.iter().copied().max().unwrap_or(0).max(1);
    let p = sources.len();
    let mut values = Vec::new();
    let mut target = Vec::new();

    for (_, rows) in table.by_occupant() {
        let mut run_start = 0;
        for t in 0..rows.len() {
            if t > 0 && (rows[t].timestamp - rows[t - 1].timestamp).num_minutes() != 1 {
                run_start = t;
            }
            if t - run_start < warmup {
                continue;
            }
            let (cur, prev) = (&rows[t], &rows[t - 1]);
            let flags = (
                spec.calendar.day_type(cur.date()),
                TimeOfDay::of_minute(cur.minute_of_day()),
                spec.academic.period(cur.date()),
            );
            for (meta, source) in &sources {
                let v = match source {
                    Source::Dummy(group, k) => {
                        let index = match group {
                            DummyGroup::DayType => flags.0 as u8,
                            DummyGroup::TimeOfDay => flags.1 as u8,
                            DummyGroup::AcademicPeriod => match flags.2 {
                                AcademicPeriod::Regular => 0,
                                AcademicPeriod::Break => 1,
                                AcademicPeriod::Midterm => 2,
                                AcademicPeriod::Final => 3,
                            },
                        };
                        f64::from(u8::from(index == *k))
                    }
                    Source::Current(c) => {
                        optional_value(cur, *c).ok_or_else(|| missing(meta, cur))?
                    }
                    Source::Previous(c) => {
                        optional_value(prev, *c).ok_or_else(|| missing(meta, prev))?
                    }
                    Source::Extra(name) => {
                        *cur.extra.get(name).ok_or_else(|| missing(meta, cur))?
                    }
                    Source::Lag(res, k) => f64::from(u8::from(rows[t - k].state(*res))),
                    Source::PctBaseline(res) => {
                        // usage so far today, excluding the minute being predicted
                        let used = if prev.date() == cur.date() {
                            prev.usage(*res)
                        } else {
                            0.0
                        };
                        let b = spec.baselines[res].get(spec.calendar.day_type(cur.date()));
                        if !(b > 0.0) {
                            return Err(Error::InvalidBaseline(b));
                        }
                        used / b
                    }
                };
                values.push(v);
            }
            target.push(u8::from(cur.state(spec.target)));
        }
    }
    let n = target.len();
    let columns = sources.into_iter().map(|(m, _)| m).collect();
    if n == 0 {
        return Err(Error::TooFewRows {
            rows: 0,
            needed: warmup + 1,
        });
    }
    debug_assert_eq!(values.len(), n * p);
    FeatureMatrix::new(values, columns, Some(target))
}

fn missing(meta: &ColumnMeta, r: &MinuteRecord) -> Error {
    Error::Format(format!(
        "`{}` missing at {} for {}",
        meta.name, r.timestamp, r.occupant_id
    ))
}
