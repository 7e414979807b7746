use super::record::{DateRange, MinuteTable};
use crate::error::{Error, Result};

/// Partitions rows by date into train and test tables; rows in neither
/// interval are dropped. Row order is preserved within each output.
pub fn split_periods(
    table: &MinuteTable,
    train: &DateRange,
    test: &DateRange,
) -> Result<(MinuteTable, MinuteTable)> {
    if train.overlaps(test) {
        return Err(Error::Overlap);
    }
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for r in table.records() {
        let date = r.date();
        if train.contains(date) {
            train_rows.push(r.clone());
        } else if test.contains(date) {
            test_rows.push(r.clone());
        }
    }
    let schema = table.schema().clone();
    Ok((
        MinuteTable::from_sorted(train_rows, schema.clone()),
        MinuteTable::from_sorted(test_rows, schema),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record::{ExternalReadings, IndoorReadings, MinuteRecord, TableSchema};
    use chrono::{FixedOffset, NaiveDate, TimeZone};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 10, n).unwrap()
    }

    fn table(days: &[u32]) -> MinuteTable {
        let rows = days
            .iter()
            .enumerate()
            .map(|(i, &d)| MinuteRecord {
                occupant_id: format!("o{}", i % 3),
                timestamp: FixedOffset::east_opt(0)
                    .unwrap()
                    .from_local_datetime(&day(d).and_hms_opt(0, (i % 60) as u32, 0).unwrap())
                    .unwrap(),
                device_states: BTreeMap::new(),
                usage_today: BTreeMap::new(),
                indoor: IndoorReadings::default(),
                external: ExternalReadings::default(),
                points_total: i as f64,
                survey_points: 0.0,
                rank: None,
                portal_visits_today: 0,
                extra: BTreeMap::new(),
            })
            .collect();
        MinuteTable::new(rows, TableSchema::default()).unwrap()
    }

    #[test]
    fn seven_and_three() {
        let t = table(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let (a, b) = split_periods(
            &t,
            &DateRange::new(day(1), day(7)),
            &DateRange::new(day(8), day(20)),
        )
        .unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
    }

    #[test]
    fn overlap_rejected() {
        let t = table(&[1]);
        let err = split_periods(
            &t,
            &DateRange::new(day(1), day(7)),
            &DateRange::new(day(7), day(9)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Overlap));
    }

    #[test]
    fn empty_test_interval() {
        let t = table(&[1, 2, 3]);
        let (a, b) = split_periods(
            &t,
            &DateRange::new(day(1), day(30)),
            &DateRange::new(day(2), day(1)),
        )
        .unwrap();
        assert_eq!(a, t);
        assert!(b.is_empty());
    }

    proptest! {
        #[test]
        fn partition_plus_dropped_is_the_input(days in proptest::collection::vec(1u32..=28, 1..60), cut in 1u32..28, gap in 0u32..3) {
            let t = table(&days);
            let train = DateRange::new(day(1), day(cut));
            let test = DateRange::new(day((cut + 1 + gap).min(28)), day(28));
            let (a, b) = split_periods(&t, &train, &test).unwrap();
            let mut seen: Vec<f64> = a.records().iter().chain(b.records()).map(|r| r.points_total).collect();
            let dropped: Vec<f64> = t.records().iter().filter(|r| !train.contains(r.date()) && !test.contains(r.date())).map(|r| r.points_total).collect();
            seen.extend(dropped);
            seen.sort_by(f64::total_cmp);
            let mut all: Vec<f64> = t.records().iter().map(|r| r.points_total).collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(seen, all);
        }
    }
}
