use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng as _, RngCore};

use super::exogenous::{ExogenousMinute, ExogenousModel};
use super::gumbel::{logit_probabilities, sample_gumbel_choice};
use super::profile::{
    scaled_utilities, MinuteContext, OccupantProfile, StateHistory, UtilityBasis,
};
use crate::data::{
    daily_points, ExternalReadings, GameConfig, IndoorReadings, MinuteRecord, MinuteTable,
    OptionalColumn, Resource, TableSchema,
};
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::{seeded_rng, Rng};

const MINUTES_PER_DAY: usize = 1440;

fn base_schema(resources: Vec<Resource>, exo: &ExogenousModel) -> TableSchema {
    let present: BTreeSet<OptionalColumn> = [
        OptionalColumn::IndoorTemperature,
        OptionalColumn::IndoorHumidity,
        OptionalColumn::IndoorIlluminance,
        OptionalColumn::ExtTemperature,
        OptionalColumn::ExtHumidity,
        OptionalColumn::ExtSolarRadiation,
        OptionalColumn::PointsTotal,
        OptionalColumn::SurveyPoints,
        OptionalColumn::PortalVisits,
    ]
    .into();
    TableSchema {
        resources,
        present,
        extras: exo.synthetic_names(),
    }
}

/// Simulates one occupant minute by minute.
///
/// At each minute every resource independently draws an alternative from its
/// logit choice model. Jointly maximizing the sum of per-resource random
/// utilities with independent noise per resource is the same as maximizing
/// each resource separately, so the per-resource draws realize the joint
/// optimum of the aggregated utilities.
pub fn simulate_occupant(
    profile: &OccupantProfile,
    exo: &ExogenousModel,
    horizon: usize,
    game: &GameConfig,
    rng: &mut Rng,
) -> Result<MinuteTable> {
    if horizon < MINUTES_PER_DAY {
        return Err(Error::InvalidHorizon(horizon));
    }
    let series = exo.generate(horizon)?;
    let records = simulate_series(profile, exo, &series, game, rng)?;
    let resources = profile
        .resources
        .iter()
        .map(|r| r.resource)
        .collect::<BTreeSet<_>>();
    Ok(MinuteTable::from_sorted(
        records,
        base_schema(resources.into_iter().collect(), exo),
    ))
}

fn simulate_series(
    profile: &OccupantProfile,
    exo: &ExogenousModel,
    series: &[ExogenousMinute],
    game: &GameConfig,
    rng: &mut Rng,
) -> Result<Vec<MinuteRecord>> {
    profile.validate()?;
    game.validate()?;
    let names = exo.synthetic_names();
    let basis = UtilityBasis::resolve(profile, &names)?;
    let mut history = StateHistory::new(profile.lag_order);
    let mut usage: BTreeMap<Resource, f64> = profile
        .resources
        .iter()
        .map(|r| (r.resource, 0.0))
        .collect();
    let mut points_total = 0.0;
    let mut visits = 0u32;
    let mut records = Vec::with_capacity(series.len());

    for (t, exo_minute) in series.iter().enumerate() {
        if t % MINUTES_PER_DAY == 0 {
            usage.values_mut().for_each(|u| *u = 0.0);
            visits = 0;
        }
        let extras: BTreeMap<String, f64> = names
            .iter()
            .cloned()
            .zip(exo_minute.synthetic.iter().copied())
            .collect();
        let flags = exo.flags(&exo_minute.timestamp);
        let x = basis.evaluate(&MinuteContext {
            temperature: Some(exo_minute.temperature),
            humidity: Some(exo_minute.humidity),
            solar: Some(exo_minute.solar_radiation),
            flags,
            extras: &extras,
            history: &history,
        })?;

        let mut states = BTreeMap::new();
        for res in &profile.resources {
            let utilities = scaled_utilities(res, &x, profile.gumbel_scale);
            let choice = sample_gumbel_choice(&utilities, rng)?;
            let on = res.alternatives[choice].on;
            states.insert(res.resource, on);
            if on {
                *usage.get_mut(&res.resource).expect("resource tracked") += 1.0;
            }
        }
        if profile.portal_visit_rate > 0.0 && rng.random::<f64>() < profile.portal_visit_rate {
            visits += 1;
        }
        if t % MINUTES_PER_DAY == MINUTES_PER_DAY - 1 {
            points_total += daily_points(game, flags.day_type, &usage)?;
        }

        let ac = states.get(&Resource::AirCon).copied().unwrap_or(false);
        let lights = [Resource::DeskLight, Resource::CeilingLight]
            .iter()
            .filter(|r| states.get(r).copied().unwrap_or(false))
            .count() as f64;
        let mut noise = || (rng.random::<f64>() - 0.5) * 0.2;
        let indoor = IndoorReadings {
            temperature: Some(exo_minute.temperature - if ac { 5.0 } else { 1.0 } + noise()),
            humidity: Some(
                (exo_minute.humidity - if ac { 25.0 } else { 3.0 } + noise()).clamp(0.0, 100.0),
            ),
            illuminance: Some(15.0 + 250.0 * lights + 0.05 * exo_minute.solar_radiation + noise()),
        };

        records.push(MinuteRecord {
            occupant_id: profile.occupant_id.clone(),
            timestamp: exo_minute.timestamp,
            device_states: states.clone(),
            usage_today: usage.clone(),
            indoor,
            external: ExternalReadings {
                temperature: Some(exo_minute.temperature),
                humidity: Some(exo_minute.humidity),
                solar_radiation: Some(exo_minute.solar_radiation),
            },
            points_total,
            survey_points: 0.0,
            rank: None,
            portal_visits_today: visits,
            extra: extras,
        });
        history.push(states);
    }
    Ok(records)
}

/// Simulates several occupants under one shared exogenous draw. Each
/// occupant gets its own choice generator seeded from `rng`, and a daily
/// rank by `points_total` is assigned at every day end and carried forward.
pub fn simulate_cohort(
    profiles: &[OccupantProfile],
    exo: &ExogenousModel,
    horizon: usize,
    game: &GameConfig,
    rng: &mut Rng,
) -> Result<MinuteTable> {
    if horizon < MINUTES_PER_DAY {
        return Err(Error::InvalidHorizon(horizon));
    }
    let mut ids = BTreeSet::new();
    for p in profiles {
        if !ids.insert(p.occupant_id.as_str()) {
            return Err(Error::DuplicateOccupantId(p.occupant_id.clone()));
        }
    }
    let series = exo.generate(horizon)?;
    let mut per_occupant = Vec::with_capacity(profiles.len());
    for p in profiles {
        let mut own = seeded_rng(rng.next_u64());
        per_occupant.push(simulate_series(p, exo, &series, game, &mut own)?);
    }

    let n = per_occupant.len();
    let mut current: Vec<Option<u32>> = vec![None; n];
    for t in 0..horizon {
        if t % MINUTES_PER_DAY == MINUTES_PER_DAY - 1 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                per_occupant[b][t]
                    .points_total
                    .total_cmp(&per_occupant[a][t].points_total)
                    .then_with(|| {
                        per_occupant[a][t]
                            .occupant_id
                            .cmp(&per_occupant[b][t].occupant_id)
                    })
            });
            for (rank, &i) in order.iter().enumerate() {
                current[i] = Some(rank as u32 + 1);
            }
        }
        for (rows, rank) in per_occupant.iter_mut().zip(&current) {
            rows[t].rank = *rank;
        }
    }

    let resources: BTreeSet<Resource> = profiles
        .iter()
        .flat_map(|p| p.resources.iter().map(|r| r.resource))
        .collect();
    let mut schema = base_schema(resources.into_iter().collect(), exo);
    schema.present.insert(OptionalColumn::Rank);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| profiles[a].occupant_id.cmp(&profiles[b].occupant_id));
    let mut records = Vec::with_capacity(n * horizon);
    let mut slots: Vec<Option<Vec<MinuteRecord>>> = per_occupant.into_iter().map(Some).collect();
    for i in order {
        records.extend(slots[i].take().expect("each occupant taken once"));
    }
    Ok(MinuteTable::from_sorted(records, schema))
}

/// True probability that `resource` is in use at each of the profile's rows,
/// recomputed from the table's recorded covariates and lagged states.
pub fn true_on_probabilities(
    profile: &OccupantProfile,
    exo: &ExogenousModel,
    table: &MinuteTable,
    resource: Resource,
) -> Result<(Vec<f64>, Vec<u8>)> {
    profile.validate()?;
    let utility = profile
        .resource(resource)
        .ok_or_else(|| Error::UnknownColumn(resource.to_string()))?;
    let basis = UtilityBasis::resolve(profile, &table.schema().extras)?;
    let mut history = StateHistory::new(profile.lag_order);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut previous: Option<&MinuteRecord> = None;
    for r in table
        .records()
        .iter()
        .filter(|r| r.occupant_id == profile.occupant_id)
    {
        if let Some(prev) = previous {
            if (r.timestamp - prev.timestamp).num_minutes() != 1 {
                // a gap breaks the lag chain
                history = StateHistory::new(profile.lag_order);
            }
        }
        let x = basis.evaluate(&MinuteContext {
            temperature: r.external.temperature,
            humidity: r.external.humidity,
            solar: r.external.solar_radiation,
            flags: exo.flags(&r.timestamp),
            extras: &r.extra,
            history: &history,
        })?;
        let probs = logit_probabilities(&scaled_utilities(utility, &x, profile.gumbel_scale));
        scores.push(
            utility
                .alternatives
                .iter()
                .zip(&probs)
                .filter(|(a, _)| a.on)
                .map(|(_, p)| p)
                .sum(),
        );
        labels.push(u8::from(r.state(resource)));
        history.push(r.device_states.clone());
        previous = Some(r);
    }
    if labels.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok((scores, labels))
}

/// AUC of the true choice probability as a scorer of the realized states: the
/// ceiling no learner can beat in expectation.
pub fn bayes_optimal_auc(
    profile: &OccupantProfile,
    exo: &ExogenousModel,
    table: &MinuteTable,
    resource: Resource,
) -> Result<f64> {
    let (scores, labels) = true_on_probabilities(profile, exo, table, resource)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    Ok(roc_auc(&scores, &labels)?.auc)
}
