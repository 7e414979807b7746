use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::exogenous::{AcademicPeriod, CalendarFlags, TimeOfDay};
use crate::data::{DayType, Resource};
use crate::error::{Error, Result};

/// One alternative of a resource's choice set with its linear utility weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeUtility {
    pub label: String,
    /// Whether picking this alternative puts the device in use.
    pub on: bool,
    /// Weights aligned with [`OccupantProfile::features`].
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceUtility {
    pub resource: Resource,
    pub alternatives: Vec<AlternativeUtility>,
}

impl ResourceUtility {
    /// Binary `{off, on}` choice where "off" is the zero-utility reference.
    pub fn binary(resource: Resource, beta_on: Vec<f64>) -> Self {
        Self {
            resource,
            alternatives: vec![
                AlternativeUtility {
                    label: "off".into(),
                    on: false,
                    beta: vec![0.0; beta_on.len()],
                },
                AlternativeUtility {
                    label: "on".into(),
                    on: true,
                    beta: beta_on,
                },
            ],
        }
    }
}

/// Ground-truth behaviour of one simulated occupant.
///
/// Each resource's alternatives carry utilities `beta . x` over the named
/// features; the occupant picks the alternative maximizing utility plus
/// Gumbel noise of scale `gumbel_scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupantProfile {
    pub occupant_id: String,
    pub features: Vec<String>,
    pub resources: Vec<ResourceUtility>,
    #[serde(default = "unit")]
    pub gumbel_scale: f64,
    /// How many past own-states are available as `lag{k}_{resource}` features.
    #[serde(default)]
    pub lag_order: usize,
    /// Per-minute probability of a web-portal visit.
    #[serde(default)]
    pub portal_visit_rate: f64,
}

fn unit() -> f64 {
    1.0
}

impl OccupantProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.gumbel_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{}: gumbel scale must be positive",
                self.occupant_id
            )));
        }
        if !(0.0..=1.0).contains(&self.portal_visit_rate) {
            return Err(Error::InvalidConfig(
                "portal visit rate must lie in [0, 1]".into(),
            ));
        }
        for r in &self.resources {
            if r.alternatives.is_empty() {
                return Err(Error::EmptyChoiceSet);
            }
            for alt in &r.alternatives {
                if alt.beta.len() != self.features.len() {
                    return Err(Error::ArityMismatch {
                        expected: self.features.len(),
                        found: alt.beta.len(),
                    });
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.resources {
            if !seen.insert(r.resource) {
                return Err(Error::InvalidConfig(format!(
                    "resource {} listed twice",
                    r.resource
                )));
            }
        }
        Ok(())
    }

    pub fn resource(&self, resource: Resource) -> Option<&ResourceUtility> {
        self.resources.iter().find(|r| r.resource == resource)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum FeatureSource {
    Intercept,
    ExtTemperature,
    ExtHumidity,
    ExtSolar,
    DayType(DayType),
    TimeOfDay(TimeOfDay),
    Period(AcademicPeriod),
    Lag(Resource, usize),
    Extra(String),
}

impl FeatureSource {
    fn parse(name: &str, lag_order: usize, extras: &[String]) -> Result<Self> {
        Ok(match name {
            "intercept" => FeatureSource::Intercept,
            "ext_temperature" => FeatureSource::ExtTemperature,
            "ext_humidity" => FeatureSource::ExtHumidity,
            "ext_solar_radiation" => FeatureSource::ExtSolar,
            "weekday" => FeatureSource::DayType(DayType::Weekday),
            "weekend" => FeatureSource::DayType(DayType::Weekend),
            "night" => FeatureSource::TimeOfDay(TimeOfDay::Night),
            "morning" => FeatureSource::TimeOfDay(TimeOfDay::Morning),
            "afternoon" => FeatureSource::TimeOfDay(TimeOfDay::Afternoon),
            "evening" => FeatureSource::TimeOfDay(TimeOfDay::Evening),
            "regular" => FeatureSource::Period(AcademicPeriod::Regular),
            "break" => FeatureSource::Period(AcademicPeriod::Break),
            "midterm" => FeatureSource::Period(AcademicPeriod::Midterm),
            "final" => FeatureSource::Period(AcademicPeriod::Final),
            other => {
                if let Some(rest) = other.strip_prefix("lag") {
                    if let Some((k, res)) = rest.split_once('_') {
                        if let (Ok(k), Ok(res)) = (k.parse::<usize>(), res.parse::<Resource>()) {
                            if k == 0 || k > lag_order {
                                return Err(Error::InvalidConfig(format!(
                                    "feature `{other}` needs lag order >= {k}"
                                )));
                            }
                            return Ok(FeatureSource::Lag(res, k));
                        }
                    }
                }
                if extras.iter().any(|e| e == other) {
                    FeatureSource::Extra(other.to_string())
                } else {
                    return Err(Error::UnknownColumn(other.to_string()));
                }
            }
        })
    }
}

/// Own device states of the most recent minutes, newest first.
#[derive(Clone, Debug, Default)]
pub(crate) struct StateHistory {
    states: VecDeque<BTreeMap<Resource, bool>>,
    depth: usize,
}

impl StateHistory {
    pub fn new(depth: usize) -> Self {
        Self {
            states: VecDeque::with_capacity(depth + 1),
            depth,
        }
    }

    pub fn push(&mut self, states: BTreeMap<Resource, bool>) {
        if self.depth == 0 {
            return;
        }
        self.states.push_front(states);
        self.states.truncate(self.depth);
    }

    /// State `k >= 1` minutes ago; off before the history starts.
    pub fn lagged(&self, resource: Resource, k: usize) -> bool {
        self.states
            .get(k - 1)
            .and_then(|s| s.get(&resource).copied())
            .unwrap_or(false)
    }
}

/// Inputs available when evaluating utilities at one minute.
pub(crate) struct MinuteContext<'a> {
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub solar: Option<f64>,
    pub flags: CalendarFlags,
    pub extras: &'a BTreeMap<String, f64>,
    pub history: &'a StateHistory,
}

/// Resolved feature list of a profile.
#[derive(Clone, Debug)]
pub(crate) struct UtilityBasis {
    sources: Vec<FeatureSource>,
}

impl UtilityBasis {
    pub fn resolve(profile: &OccupantProfile, extras: &[String]) -> Result<Self> {
        let sources = profile
            .features
            .iter()
            .map(|f| FeatureSource::parse(f, profile.lag_order, extras))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sources })
    }

    pub fn evaluate(&self, ctx: &MinuteContext<'_>) -> Result<Vec<f64>> {
        let need =
            |v: Option<f64>, name: &str| v.ok_or_else(|| Error::UnknownColumn(name.to_string()));
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        self.sources
            .iter()
            .map(|s| {
                Ok(match s {
                    FeatureSource::Intercept => 1.0,
                    FeatureSource::ExtTemperature => need(ctx.temperature, "ext_temperature")?,
                    FeatureSource::ExtHumidity => need(ctx.humidity, "ext_humidity")?,
                    FeatureSource::ExtSolar => need(ctx.solar, "ext_solar_radiation")?,
                    FeatureSource::DayType(d) => flag(ctx.flags.day_type == *d),
                    FeatureSource::TimeOfDay(t) => flag(ctx.flags.time_of_day == *t),
                    FeatureSource::Period(p) => flag(ctx.flags.period == *p),
                    FeatureSource::Lag(r, k) => flag(ctx.history.lagged(*r, *k)),
                    FeatureSource::Extra(name) => *ctx
                        .extras
                        .get(name)
                        .ok_or_else(|| Error::UnknownColumn(name.clone()))?,
                })
            })
            .collect()
    }
}

/// Utilities of each alternative, divided by the noise scale so that a unit
/// Gumbel draw reproduces the profile's noise.
pub(crate) fn scaled_utilities(resource: &ResourceUtility, x: &[f64], scale: f64) -> Vec<f64> {
    resource
        .alternatives
        .iter()
        .map(|alt| crate::linalg::dot(&alt.beta, x) / scale)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(features: &[&str]) -> OccupantProfile {
        OccupantProfile {
            occupant_id: "p".into(),
            features: features.iter().map(|s| s.to_string()).collect(),
            resources: vec![ResourceUtility::binary(
                Resource::DeskLight,
                vec![0.0; features.len()],
            )],
            gumbel_scale: 1.0,
            lag_order: 2,
            portal_visit_rate: 0.0,
        }
    }

    #[test]
    fn feature_names_resolve() {
        let p = profile(&["intercept", "weekend", "lag2_desk_light", "syn_0"]);
        let basis = UtilityBasis::resolve(&p, &["syn_0".into()]).unwrap();
        assert_eq!(basis.sources[2], FeatureSource::Lag(Resource::DeskLight, 2));
        assert!(matches!(
            UtilityBasis::resolve(&profile(&["lag3_desk_light"]), &[]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            UtilityBasis::resolve(&profile(&["bogus"]), &[]),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn validation_catches_bad_profiles() {
        let mut p = profile(&["intercept"]);
        p.resources[0].alternatives[1].beta.push(1.0);
        assert!(matches!(p.validate(), Err(Error::ArityMismatch { .. })));
        let mut p = profile(&["intercept"]);
        p.gumbel_scale = 0.0;
        assert!(p.validate().is_err());
        let mut p = profile(&["intercept"]);
        p.resources[0].alternatives.clear();
        assert!(matches!(p.validate(), Err(Error::EmptyChoiceSet)));
    }

    #[test]
    fn history_lags() {
        let mut h = StateHistory::new(2);
        assert!(!h.lagged(Resource::DeskLight, 1));
        h.push([(Resource::DeskLight, true)].into());
        h.push([(Resource::DeskLight, false)].into());
        assert!(!h.lagged(Resource::DeskLight, 1));
        assert!(h.lagged(Resource::DeskLight, 2));
        h.push([(Resource::DeskLight, false)].into());
        assert!(!h.lagged(Resource::DeskLight, 2));
    }
}
