use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Timelike};
use serde::{Deserialize, Serialize};

use super::record::{
    ExternalReadings, IndoorReadings, MinuteRecord, MinuteTable, OptionalColumn, Resource,
    TableSchema,
};
use crate::error::{Error, Result};

/// Maps logical fields onto header names of a delimited source.
///
/// Required fields are `occupant_id` and `timestamp`; every resource listed in
/// `states` must also appear in `usage`. Any optional column left as `None`
/// is recorded as absent in the resulting [`TableSchema`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaMapping {
    pub occupant_id: String,
    pub timestamp: String,
    #[serde(default)]
    pub states: BTreeMap<Resource, String>,
    #[serde(default)]
    pub usage: BTreeMap<Resource, String>,
    #[serde(default)]
    pub optional: BTreeMap<OptionalColumn, String>,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

const EXTRA_PREFIX: &str = "x_";

impl SchemaMapping {
    /// Mapping that uses the canonical column names found in `headers`.
    pub fn infer<S: AsRef<str>>(headers: &[S]) -> Self {
        let has = |name: &str| headers.iter().any(|h| h.as_ref() == name);
        let mut mapping = SchemaMapping {
            occupant_id: "occupant_id".into(),
            timestamp: "timestamp".into(),
            states: BTreeMap::new(),
            usage: BTreeMap::new(),
            optional: BTreeMap::new(),
            extras: BTreeMap::new(),
        };
        for res in Resource::ALL {
            let state = format!("state_{res}");
            let usage = format!("usage_{res}");
            if has(&state) && has(&usage) {
                mapping.states.insert(res, state);
                mapping.usage.insert(res, usage);
            }
        }
        for col in OptionalColumn::ALL {
            if has(col.name()) {
                mapping.optional.insert(col, col.name().into());
            }
        }
        for h in headers {
            if let Some(name) = h.as_ref().strip_prefix(EXTRA_PREFIX) {
                mapping.extras.insert(name.into(), h.as_ref().into());
            }
        }
        mapping
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Offset every timestamp is normalized to; naive timestamps are read in it.
    #[serde(default)]
    pub utc_offset_minutes: i32,
}

fn default_delimiter() -> char {
    ','
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            utc_offset_minutes: 0,
        }
    }
}

impl IngestOptions {
    pub fn offset(&self) -> Result<FixedOffset> {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).ok_or_else(|| {
            Error::InvalidConfig(format!("utc offset {} minutes", self.utc_offset_minutes))
        })
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(|b| b.is_ascii())
            .ok_or_else(|| {
                Error::InvalidConfig(format!("delimiter {:?} is not ASCII", self.delimiter))
            })
    }
}

fn parse_timestamp(raw: &str, offset: &FixedOffset) -> Option<DateTime<FixedOffset>> {
    let raw = raw.trim();
    let parsed = if let Ok(minutes) = raw.parse::<i64>() {
        let utc = DateTime::from_timestamp(minutes.checked_mul(60)?, 0)?;
        Some(utc.with_timezone(offset))
    } else if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        Some(ts.with_timezone(offset))
    } else {
        [
            "%Y-%m-%dT%H:%M:%S",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M:%S",
            "%Y-%m-%d %H:%M",
        ]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .and_then(|naive| offset.from_local_datetime(&naive).single())
    }?;
    parsed.with_second(0)?.with_nanosecond(0)
}

fn parse_state(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "on" => Some(true),
        "0" | "0.0" | "false" | "off" => Some(false),
        _ => None,
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("mapped column `{name}` is not in the header")))
}

/// Reads a delimited per-minute file into a [`MinuteTable`].
pub fn ingest_minutes<R: Read>(
    source: R,
    mapping: &SchemaMapping,
    options: &IngestOptions,
) -> Result<MinuteTable> {
    let offset = options.offset()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter_byte()?)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Schema("missing header row".into()));
    }

    let id_col = column_index(&headers, &mapping.occupant_id)?;
    let ts_col = column_index(&headers, &mapping.timestamp)?;
    let mut resource_cols = Vec::new();
    for (&res, state_name) in &mapping.states {
        let usage_name = mapping
            .usage
            .get(&res)
            .ok_or_else(|| Error::Schema(format!("no usage column mapped for {res}")))?;
        resource_cols.push((
            res,
            column_index(&headers, state_name)?,
            column_index(&headers, usage_name)?,
        ));
    }
    let mut optional_cols = Vec::new();
    for (&col, name) in &mapping.optional {
        optional_cols.push((col, column_index(&headers, name)?));
    }
    let mut extra_cols = Vec::new();
    for (name, header) in &mapping.extras {
        extra_cols.push((name.clone(), column_index(&headers, header)?));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |column: &str, message: String| Error::RowParse {
            line,
            column: column.to_string(),
            message,
        };
        let cell = |idx: usize| row.get(idx).unwrap_or("").trim();
        let number = |idx: usize| -> Result<f64> {
            let raw = cell(idx);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(&headers[idx], format!("`{raw}` is not a finite number")))
        };

        let timestamp = parse_timestamp(cell(ts_col), &offset).ok_or_else(|| {
            err(
                &headers[ts_col],
                format!("`{}` is not a timestamp", cell(ts_col)),
            )
        })?;
        let mut record = MinuteRecord {
            occupant_id: cell(id_col).to_string(),
            timestamp,
            device_states: BTreeMap::new(),
            usage_today: BTreeMap::new(),
            indoor: IndoorReadings::default(),
            external: ExternalReadings::default(),
            points_total: 0.0,
            survey_points: 0.0,
            rank: None,
            portal_visits_today: 0,
            extra: BTreeMap::new(),
        };
        if record.occupant_id.is_empty() {
            return Err(err(&headers[id_col], "empty occupant id".into()));
        }
        for &(res, s_idx, u_idx) in &resource_cols {
            let state = parse_state(cell(s_idx)).ok_or_else(|| {
                err(
                    &headers[s_idx],
                    format!("`{}` is not an on/off state", cell(s_idx)),
                )
            })?;
            let usage = number(u_idx)?;
            if usage < 0.0 {
                return Err(err(&headers[u_idx], "negative usage".into()));
            }
            record.device_states.insert(res, state);
            record.usage_today.insert(res, usage);
        }
        for &(col, idx) in &optional_cols {
            if col == OptionalColumn::Rank {
                // blank rank means "not yet ranked"
                let raw = cell(idx);
                if !raw.is_empty() {
                    let rank = raw.parse::<u32>().ok().filter(|r| *r > 0).ok_or_else(|| {
                        err(&headers[idx], format!("`{raw}` is not a positive rank"))
                    })?;
                    record.rank = Some(rank);
                }
                continue;
            }
            if col == OptionalColumn::PortalVisits {
                let raw = cell(idx);
                record.portal_visits_today = raw
                    .parse::<u32>()
                    .map_err(|_| err(&headers[idx], format!("`{raw}` is not a visit count")))?;
                continue;
            }
            let v = number(idx)?;
            match col {
                OptionalColumn::IndoorTemperature => record.indoor.temperature = Some(v),
                OptionalColumn::IndoorHumidity => record.indoor.humidity = Some(v),
                OptionalColumn::IndoorIlluminance => record.indoor.illuminance = Some(v),
                OptionalColumn::ExtTemperature => record.external.temperature = Some(v),
                OptionalColumn::ExtHumidity => record.external.humidity = Some(v),
                OptionalColumn::ExtSolarRadiation => record.external.solar_radiation = Some(v),
                OptionalColumn::PointsTotal => record.points_total = v,
                OptionalColumn::SurveyPoints => record.survey_points = v,
                OptionalColumn::Rank | OptionalColumn::PortalVisits => unreachable!(),
            }
        }
        for (name, idx) in &extra_cols {
            record.extra.insert(name.clone(), number(*idx)?);
        }
        records.push(record);
    }

    let schema = TableSchema {
        resources: mapping.states.keys().copied().collect(),
        present: mapping.optional.keys().copied().collect::<BTreeSet<_>>(),
        extras: mapping.extras.keys().cloned().collect(),
    };
    MinuteTable::new(records, schema)
}

/// Writes a table in the canonical layout that [`SchemaMapping::infer`] reads
/// back losslessly.
pub fn write_minutes<W: Write>(table: &MinuteTable, sink: W, delimiter: char) -> Result<()> {
    let delim = IngestOptions {
        delimiter,
        utc_offset_minutes: 0,
    }
    .delimiter_byte()?;
    let mut writer = csv::WriterBuilder::new().delimiter(delim).from_writer(sink);
    let schema = table.schema();
    let optional: Vec<OptionalColumn> = OptionalColumn::ALL
        .into_iter()
        .filter(|c| schema.has(*c))
        .collect();

    let mut header = vec!["occupant_id".to_string(), "timestamp".to_string()];
    for res in &schema.resources {
        header.push(format!("state_{res}"));
    }
    for res in &schema.resources {
        header.push(format!("usage_{res}"));
    }
    header.extend(optional.iter().map(|c| c.name().to_string()));
    header.extend(schema.extras.iter().map(|e| format!("{EXTRA_PREFIX}{e}")));
    writer.write_record(&header)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in table.records() {
        let mut row = vec![r.occupant_id.clone(), r.timestamp.to_rfc3339()];
        for res in &schema.resources {
            row.push(if r.state(*res) {
                "1".into()
            } else {
                "0".into()
            });
        }
        for res in &schema.resources {
            row.push(r.usage(*res).to_string());
        }
        for col in &optional {
            row.push(match col {
                OptionalColumn::IndoorTemperature => opt(r.indoor.temperature),
                OptionalColumn::IndoorHumidity => opt(r.indoor.humidity),
                OptionalColumn::IndoorIlluminance => opt(r.indoor.illuminance),
                OptionalColumn::ExtTemperature => opt(r.external.temperature),
                OptionalColumn::ExtHumidity => opt(r.external.humidity),
                OptionalColumn::ExtSolarRadiation => opt(r.external.solar_radiation),
                OptionalColumn::PointsTotal => r.points_total.to_string(),
                OptionalColumn::SurveyPoints => r.survey_points.to_string(),
                OptionalColumn::Rank => r.rank.map(|x| x.to_string()).unwrap_or_default(),
                OptionalColumn::PortalVisits => r.portal_visits_today.to_string(),
            });
        }
        for e in &schema.extras {
            row.push(r.extra.get(e).map(|v| v.to_string()).unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
occupant_id,timestamp,state_desk_light,usage_desk_light,ext_temperature
u1,2017-09-12T00:01:00+00:00,1,2,28.5
u1,2017-09-12T00:00:00+00:00,1,1,28.4
u2,2017-09-12 00:00,0,0,28.4
";

    fn ingest(text: &str) -> Result<MinuteTable> {
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        ingest_minutes(
            text.as_bytes(),
            &SchemaMapping::infer(&header),
            &IngestOptions::default(),
        )
    }

    #[test]
    fn three_rows_sorted_and_parsed() {
        let table = ingest(SMALL).unwrap();
        assert_eq!(table.len(), 3);
        let r = &table.records()[0];
        assert_eq!(r.occupant_id, "u1");
        assert_eq!(r.minute_of_day(), 0);
        assert_eq!(r.usage(Resource::DeskLight), 1.0);
        assert_eq!(r.external.temperature, Some(28.4));
        assert_eq!(r.indoor.temperature, None);
        assert!(table.schema().has(OptionalColumn::ExtTemperature));
        assert!(!table.schema().has(OptionalColumn::IndoorTemperature));
        assert_eq!(table.schema().resources, vec![Resource::DeskLight]);
    }

    #[test]
    fn malformed_timestamp_reports_line() {
        let text = SMALL.replace("u2,2017-09-12 00:00", "u2,banana");
        match ingest(&text).unwrap_err() {
            Error::RowParse { line, column, .. } => {
                assert_eq!(line, 4);
                assert_eq!(column, "timestamp");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = format!("{SMALL}u2,2017-09-12T00:00:00Z,1,1,28.0\n");
        assert!(matches!(
            ingest(&text).unwrap_err(),
            Error::DuplicateKey { .. }
        ));
    }

    #[test]
    fn missing_mapped_column_is_schema_error() {
        let mut mapping = SchemaMapping::infer(&["occupant_id", "timestamp"]);
        mapping
            .optional
            .insert(OptionalColumn::IndoorHumidity, "hum".into());
        let err =
            ingest_minutes(SMALL.as_bytes(), &mapping, &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn epoch_minutes_and_timezone_normalization() {
        let text = "occupant_id,timestamp\nu,25000000\nv,2017-09-12T08:00:00+08:00\n";
        let opts = IngestOptions {
            delimiter: ',',
            utc_offset_minutes: 480,
        };
        let t = ingest_minutes(
            text.as_bytes(),
            &SchemaMapping::infer(&["occupant_id", "timestamp"]),
            &opts,
        )
        .unwrap();
        assert_eq!(t.records()[0].timestamp.timestamp(), 25_000_000 * 60);
        assert_eq!(
            t.records()[0].timestamp.offset().local_minus_utc(),
            480 * 60
        );
        assert_eq!(t.records()[1].minute_of_day(), 8 * 60);
    }

    #[test]
    fn semicolon_delimiter() {
        let text = SMALL.replace(',', ";");
        let header: Vec<&str> = text.lines().next().unwrap().split(';').collect();
        let opts = IngestOptions {
            delimiter: ';',
            utc_offset_minutes: 0,
        };
        let t = ingest_minutes(text.as_bytes(), &SchemaMapping::infer(&header), &opts).unwrap();
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let table = ingest(SMALL).unwrap();
        let mut buf = Vec::new();
        write_minutes(&table, &mut buf, ',').unwrap();
        let back = ingest(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(table, back);
    }
}
