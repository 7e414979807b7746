use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metered room resource.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    CeilingLight,
    DeskLight,
    CeilingFan,
    AirCon,
}

impl Resource {
    pub const ALL: [Resource; 4] = [
        Resource::CeilingLight,
        Resource::DeskLight,
        Resource::CeilingFan,
        Resource::AirCon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Resource::CeilingLight => "ceiling_light",
            Resource::DeskLight => "desk_light",
            Resource::CeilingFan => "ceiling_fan",
            Resource::AirCon => "air_con",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Resource::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::UnknownColumn(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl fmt::Display for DayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        })
    }
}

/// Inclusive calendar-date interval. `end < start` denotes the empty interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        !self.is_empty() && date >= self.start && date <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.start <= other.end && other.start <= self.end
    }
}

/// Weekday/weekend classification. Saturday and Sunday are weekend days, as
/// is every listed holiday.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn day_type(&self, date: NaiveDate) -> DayType {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || self.holidays.contains(&date) {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndoorReadings {
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub illuminance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalReadings {
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub solar_radiation: Option<f64>,
}

/// One occupant-minute of telemetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteRecord {
    pub occupant_id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub device_states: BTreeMap<Resource, bool>,
    /// Minutes of use accumulated since local midnight, including this minute.
    pub usage_today: BTreeMap<Resource, f64>,
    pub indoor: IndoorReadings,
    pub external: ExternalReadings,
    pub points_total: f64,
    pub survey_points: f64,
    pub rank: Option<u32>,
    pub portal_visits_today: u32,
    /// Additional numeric covariates carried through ingestion by name.
    pub extra: BTreeMap<String, f64>,
}

impl MinuteRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    pub fn minute_of_day(&self) -> u32 {
        self.timestamp.hour() * 60 + self.timestamp.minute()
    }

    pub fn state(&self, resource: Resource) -> bool {
        self.device_states.get(&resource).copied().unwrap_or(false)
    }

    pub fn usage(&self, resource: Resource) -> f64 {
        self.usage_today.get(&resource).copied().unwrap_or(0.0)
    }
}

/// Columns that may be missing from a source file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionalColumn {
    IndoorTemperature,
    IndoorHumidity,
    IndoorIlluminance,
    ExtTemperature,
    ExtHumidity,
    ExtSolarRadiation,
    PointsTotal,
    SurveyPoints,
    Rank,
    PortalVisits,
}

impl OptionalColumn {
    pub const ALL: [OptionalColumn; 10] = [
        OptionalColumn::IndoorTemperature,
        OptionalColumn::IndoorHumidity,
        OptionalColumn::IndoorIlluminance,
        OptionalColumn::ExtTemperature,
        OptionalColumn::ExtHumidity,
        OptionalColumn::ExtSolarRadiation,
        OptionalColumn::PointsTotal,
        OptionalColumn::SurveyPoints,
        OptionalColumn::Rank,
        OptionalColumn::PortalVisits,
    ];

    /// Canonical header name.
    pub fn name(self) -> &'static str {
        match self {
            OptionalColumn::IndoorTemperature => "indoor_temperature",
            OptionalColumn::IndoorHumidity => "indoor_humidity",
            OptionalColumn::IndoorIlluminance => "indoor_illuminance",
            OptionalColumn::ExtTemperature => "ext_temperature",
            OptionalColumn::ExtHumidity => "ext_humidity",
            OptionalColumn::ExtSolarRadiation => "ext_solar_radiation",
            OptionalColumn::PointsTotal => "points_total",
            OptionalColumn::SurveyPoints => "survey_points",
            OptionalColumn::Rank => "rank",
            OptionalColumn::PortalVisits => "portal_visits_today",
        }
    }
}

/// Which columns a table actually carries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub resources: Vec<Resource>,
    pub present: BTreeSet<OptionalColumn>,
    pub extras: Vec<String>,
}

impl TableSchema {
    pub fn has(&self, column: OptionalColumn) -> bool {
        self.present.contains(&column)
    }
}

/// Records ordered by `(occupant_id, timestamp)` with unique keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinuteTable {
    records: Vec<MinuteRecord>,
    schema: TableSchema,
}

impl MinuteTable {
    /// Sorts the records and rejects duplicate `(occupant, timestamp)` keys.
    pub fn new(mut records: Vec<MinuteRecord>, schema: TableSchema) -> Result<Self> {
        records.sort_by(|a, b| {
            a.occupant_id
                .cmp(&b.occupant_id)
                .then(a.timestamp.cmp(&b.timestamp))
        });
        for pair in records.windows(2) {
            if pair[0].occupant_id == pair[1].occupant_id && pair[0].timestamp == pair[1].timestamp
            {
                return Err(Error::DuplicateKey {
                    occupant: pair[0].occupant_id.clone(),
                    timestamp: pair[0].timestamp.to_rfc3339(),
                });
            }
        }
        Ok(Self { records, schema })
    }

    /// Builds a table from records already known to be sorted and unique.
    pub(crate) fn from_sorted(records: Vec<MinuteRecord>, schema: TableSchema) -> Self {
        debug_assert!(records.windows(2).all(|p| {
            (p[0].occupant_id.as_str(), p[0].timestamp)
                < (p[1].occupant_id.as_str(), p[1].timestamp)
        }));
        Self { records, schema }
    }

    pub fn records(&self) -> &[MinuteRecord] {
        &self.records
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<MinuteRecord> {
        self.records
    }

    pub fn occupants(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.records {
            if out.last() != Some(&r.occupant_id.as_str()) {
                out.push(&r.occupant_id);
            }
        }
        out
    }

    /// Contiguous slice of rows belonging to each occupant, in id order.
    pub fn by_occupant(&self) -> Vec<(&str, &[MinuteRecord])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len()
                || self.records[i].occupant_id != self.records[start].occupant_id
            {
                out.push((
                    self.records[start].occupant_id.as_str(),
                    &self.records[start..i],
                ));
                start = i;
            }
        }
        out
    }

    /// Checks the per-record usage invariants: binary states are implied by
    /// the type; usage is nondecreasing within a day, resets across days and
    /// never exceeds the minutes elapsed since midnight.
    pub fn check_usage_invariants(&self) -> Result<()> {
        for (_, rows) in self.by_occupant() {
            for (i, row) in rows.iter().enumerate() {
                for (&res, &u) in &row.usage_today {
                    if u < 0.0 || u > (row.minute_of_day() + 1) as f64 {
                        return Err(Error::Format(format!(
                            "usage {u} of {res} exceeds elapsed minutes at {}",
                            row.timestamp
                        )));
                    }
                    if i > 0 && rows[i - 1].date() == row.date() && u < rows[i - 1].usage(res) {
                        return Err(Error::Format(format!(
                            "usage of {res} decreased within a day at {}",
                            row.timestamp
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Game parameters: per-resource baselines by day type, point boosters and
/// the pre-game observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub baselines: BTreeMap<Resource, super::DayBaseline>,
    pub boosters: BTreeMap<Resource, f64>,
    #[serde(default)]
    pub pre_game_range: Option<DateRange>,
    #[serde(default)]
    pub calendar: Calendar,
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        for b in self.baselines.values() {
            if !(b.weekday > 0.0 && b.weekend > 0.0) {
                return Err(Error::InvalidBaseline(b.weekday.min(b.weekend)));
            }
        }
        for (res, s) in &self.boosters {
            if !(*s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "booster for {res} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn baseline(&self, resource: Resource, day: DayType) -> Option<f64> {
        self.baselines.get(&resource).map(|b| b.get(day))
    }

    pub fn booster(&self, resource: Resource) -> f64 {
        self.boosters.get(&resource).copied().unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn rec(id: &str, minute: i64) -> MinuteRecord {
        let ts = FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2017, 9, 12, 0, 0, 0)
            .unwrap()
            + chrono::Duration::minutes(minute);
        MinuteRecord {
            occupant_id: id.into(),
            timestamp: ts,
            device_states: BTreeMap::new(),
            usage_today: BTreeMap::new(),
            indoor: IndoorReadings::default(),
            external: ExternalReadings::default(),
            points_total: 0.0,
            survey_points: 0.0,
            rank: None,
            portal_visits_today: 0,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn table_sorts_and_rejects_duplicates() {
        let t = MinuteTable::new(
            vec![rec("b", 1), rec("a", 2), rec("a", 1)],
            TableSchema::default(),
        )
        .unwrap();
        let keys: Vec<_> = t
            .records()
            .iter()
            .map(|r| (r.occupant_id.clone(), r.minute_of_day()))
            .collect();
        assert_eq!(
            keys,
            vec![("a".into(), 1), ("a".into(), 2), ("b".into(), 1)]
        );
        assert_eq!(t.by_occupant().len(), 2);

        let err =
            MinuteTable::new(vec![rec("a", 1), rec("a", 1)], TableSchema::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn weekend_includes_holidays() {
        let mut cal = Calendar::default();
        let sat = NaiveDate::from_ymd_opt(2017, 9, 16).unwrap();
        let tue = NaiveDate::from_ymd_opt(2017, 9, 12).unwrap();
        assert_eq!(cal.day_type(sat), DayType::Weekend);
        assert_eq!(cal.day_type(tue), DayType::Weekday);
        cal.holidays.insert(tue);
        assert_eq!(cal.day_type(tue), DayType::Weekend);
    }

    #[test]
    fn date_range_edges() {
        let d = |m, day| NaiveDate::from_ymd_opt(2017, m, day).unwrap();
        let a = DateRange::new(d(9, 12), d(11, 19));
        let b = DateRange::new(d(11, 20), d(12, 3));
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&DateRange::new(d(11, 19), d(11, 25))));
        let empty = DateRange::new(d(2, 1), d(1, 1));
        assert!(empty.is_empty() && !empty.contains(d(1, 15)) && !empty.overlaps(&a));
        assert_eq!((a.end - a.start).num_days() + 1, 69);
        assert_eq!((b.end - b.start).num_days() + 1, 14);
    }
}
