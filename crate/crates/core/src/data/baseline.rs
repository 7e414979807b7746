use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::{Calendar, DateRange, DayType, MinuteTable, Resource};
use crate::error::{Error, Result};

/// Expected minutes of use per day, split by day type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayBaseline {
    pub weekday: f64,
    pub weekend: f64,
}

impl DayBaseline {
    pub fn get(&self, day: DayType) -> f64 {
        match day {
            DayType::Weekday => self.weekday,
            DayType::Weekend => self.weekend,
        }
    }
}

pub type Baselines = BTreeMap<Resource, DayBaseline>;

/// Total minutes of use per `(occupant, date, resource)`, taken from the
/// day's accumulated usage counter.
pub fn daily_usage_totals(
    table: &MinuteTable,
) -> BTreeMap<(String, NaiveDate), BTreeMap<Resource, f64>> {
    let mut out: BTreeMap<(String, NaiveDate), BTreeMap<Resource, f64>> = BTreeMap::new();
    for r in table.records() {
        let day = out.entry((r.occupant_id.clone(), r.date())).or_default();
        for &res in &table.schema().resources {
            let slot = day.entry(res).or_insert(0.0);
            *slot = slot.max(r.usage(res));
        }
    }
    out
}

/// Per-occupant weekday and weekend baselines: the mean daily total over
/// days of each type within `pre_game`.
pub fn compute_baselines(
    table: &MinuteTable,
    pre_game: &DateRange,
    calendar: &Calendar,
) -> Result<BTreeMap<String, Baselines>> {
    if pre_game.is_empty() {
        return Err(Error::InvalidConfig("pre-game range is empty".into()));
    }
    // (occupant, resource, daytype) -> (sum, days)
    let mut acc: BTreeMap<(String, Resource, DayType), (f64, usize)> = BTreeMap::new();
    for ((occupant, date), totals) in daily_usage_totals(table) {
        if !pre_game.contains(date) {
            continue;
        }
        let day = calendar.day_type(date);
        for (res, total) in totals {
            let slot = acc.entry((occupant.clone(), res, day)).or_insert((0.0, 0));
            slot.0 += total;
            slot.1 += 1;
        }
    }

    let mut out = BTreeMap::new();
    for occupant in table.occupants() {
        let mut baselines = Baselines::new();
        for &res in &table.schema().resources {
            let mean_for = |day: DayType| -> Result<f64> {
                match acc.get(&(occupant.to_string(), res, day)) {
                    Some(&(sum, n)) if n > 0 => Ok(sum / n as f64),
                    _ => Err(Error::MissingBaselineData {
                        occupant: occupant.to_string(),
                        resource: res.to_string(),
                        daytype: day.to_string(),
                    }),
                }
            };
            baselines.insert(
                res,
                DayBaseline {
                    weekday: mean_for(DayType::Weekday)?,
                    weekend: mean_for(DayType::Weekend)?,
                },
            );
        }
        out.insert(occupant.to_string(), baselines);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record::{ExternalReadings, IndoorReadings, MinuteRecord, TableSchema};
    use chrono::{FixedOffset, TimeZone};

    fn end_of_day(id: &str, date: NaiveDate, usage: f64) -> MinuteRecord {
        let ts = FixedOffset::east_opt(0)
            .unwrap()
            .from_local_datetime(&date.and_hms_opt(23, 59, 0).unwrap())
            .unwrap();
        MinuteRecord {
            occupant_id: id.into(),
            timestamp: ts,
            device_states: [(Resource::DeskLight, false)].into(),
            usage_today: [(Resource::DeskLight, usage)].into(),
            indoor: IndoorReadings::default(),
            external: ExternalReadings::default(),
            points_total: 0.0,
            survey_points: 0.0,
            rank: None,
            portal_visits_today: 0,
            extra: BTreeMap::new(),
        }
    }

    fn schema() -> TableSchema {
        TableSchema {
            resources: vec![Resource::DeskLight],
            ..TableSchema::default()
        }
    }

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 9, day).unwrap()
    }

    #[test]
    fn weekday_and_weekend_means() {
        // Sep 11 and 12 2017 are Mon/Tue, Sep 16 is Saturday.
        let rows = vec![
            end_of_day("a", d(11), 400.0),
            end_of_day("a", d(12), 420.0),
            end_of_day("a", d(16), 500.0),
            end_of_day("a", d(25), 9999.0),
        ];
        let table = MinuteTable::new(rows.clone(), schema()).unwrap();
        let range = DateRange::new(d(1), d(20));
        let b = compute_baselines(&table, &range, &Calendar::default()).unwrap();
        assert_eq!(
            b["a"][&Resource::DeskLight],
            DayBaseline {
                weekday: 410.0,
                weekend: 500.0
            }
        );

        let mut reversed = rows;
        reversed.reverse();
        let again = compute_baselines(
            &MinuteTable::new(reversed, schema()).unwrap(),
            &range,
            &Calendar::default(),
        )
        .unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn missing_weekend_is_an_error() {
        let table = MinuteTable::new(vec![end_of_day("a", d(11), 400.0)], schema()).unwrap();
        let err = compute_baselines(&table, &DateRange::new(d(1), d(20)), &Calendar::default())
            .unwrap_err();
        assert!(
            matches!(err, Error::MissingBaselineData { ref daytype, .. } if daytype == "weekend")
        );
    }

    proptest::proptest! {
        #[test]
        fn baselines_ignore_row_order_and_occupant_labels(
            usage in proptest::collection::vec(0.0f64..1440.0, 3 * 14),
            order_seed in proptest::prelude::any::<u64>(),
            relabel in proptest::sample::select(vec![[0usize, 1, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]),
        ) {
            use rand::seq::SliceRandom;
            let names = ["occ_a", "occ_b", "occ_c"];
            let mut rows = Vec::new();
            let mut renamed = Vec::new();
            for k in 0..3 {
                for day in 0..14 {
                    let u = usage[k * 14 + day];
                    rows.push(end_of_day(names[k], d(4 + day as u32), u));
                    renamed.push(end_of_day(names[relabel[k]], d(4 + day as u32), u));
                }
            }
            renamed.shuffle(&mut crate::seeded_rng(order_seed));
            let range = DateRange::new(d(1), d(30));
            let cal = Calendar::default();
            let base = compute_baselines(&MinuteTable::new(rows, schema()).unwrap(), &range, &cal).unwrap();
            let moved = compute_baselines(&MinuteTable::new(renamed, schema()).unwrap(), &range, &cal).unwrap();
            for k in 0..3 {
                proptest::prop_assert_eq!(&base[names[k]], &moved[names[relabel[k]]]);
            }
        }
    }
}
