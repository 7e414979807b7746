use chrono::{DateTime, Duration, FixedOffset, NaiveDate, TimeZone};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Calendar, DateRange, DayType};
use crate::error::{Error, Result};
use crate::seeded_rng;

/// Sinusoidal daily cycle `mean + amplitude * cos(2 pi (m - peak) / 1440)`
/// plus Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyCycle {
    pub mean: f64,
    pub amplitude: f64,
    /// Minute of day at which the cycle peaks.
    pub peak_minute: f64,
    pub noise_std: f64,
}

impl DailyCycle {
    fn value(&self, minute: u32, noise: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * (minute as f64 - self.peak_minute) / 1440.0;
        self.mean + self.amplitude * phase.cos() + self.noise_std * noise
    }
}

/// Academic calendar used for the break/midterm/final dummies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcademicCalendar {
    #[serde(default)]
    pub breaks: Vec<DateRange>,
    #[serde(default)]
    pub midterms: Vec<DateRange>,
    #[serde(default)]
    pub finals: Vec<DateRange>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcademicPeriod {
    Regular,
    Break,
    Midterm,
    Final,
}

impl AcademicCalendar {
    /// Finals take precedence over midterms, which take precedence over breaks.
    pub fn period(&self, date: NaiveDate) -> AcademicPeriod {
        let hit = |ranges: &[DateRange]| ranges.iter().any(|r| r.contains(date));
        if hit(&self.finals) {
            AcademicPeriod::Final
        } else if hit(&self.midterms) {
            AcademicPeriod::Midterm
        } else if hit(&self.breaks) {
            AcademicPeriod::Break
        } else {
            AcademicPeriod::Regular
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    Night,
    Morning,
    Afternoon,
    Evening,
}

impl TimeOfDay {
    pub fn of_minute(minute: u32) -> Self {
        match minute / 60 {
            0..=5 => TimeOfDay::Night,
            6..=11 => TimeOfDay::Morning,
            12..=17 => TimeOfDay::Afternoon,
            _ => TimeOfDay::Evening,
        }
    }
}

/// Calendar dummies, one-hot within each group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CalendarFlags {
    pub day_type: DayType,
    pub time_of_day: TimeOfDay,
    pub period: AcademicPeriod,
}

/// Exogenous drivers shared by all occupants: weather, calendar and optional
/// synthetic standard-normal covariates `syn_0, syn_1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousModel {
    pub start: NaiveDate,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    pub temperature: DailyCycle,
    pub humidity: DailyCycle,
    /// Solar radiation follows the positive part of its cycle.
    pub solar: DailyCycle,
    #[serde(default)]
    pub synthetic_covariates: usize,
    #[serde(default)]
    pub calendar: Calendar,
    #[serde(default)]
    pub academic: AcademicCalendar,
    pub seed: u64,
}

impl ExogenousModel {
    /// A tropical-campus climate starting on the given date.
    pub fn tropical(start: NaiveDate, seed: u64) -> Self {
        Self {
            start,
            utc_offset_minutes: 0,
            temperature: DailyCycle {
                mean: 28.0,
                amplitude: 3.0,
                peak_minute: 14.0 * 60.0,
                noise_std: 0.3,
            },
            humidity: DailyCycle {
                mean: 78.0,
                amplitude: 12.0,
                peak_minute: 5.0 * 60.0,
                noise_std: 2.0,
            },
            solar: DailyCycle {
                mean: 150.0,
                amplitude: 650.0,
                peak_minute: 13.0 * 60.0,
                noise_std: 20.0,
            },
            synthetic_covariates: 0,
            calendar: Calendar::default(),
            academic: AcademicCalendar::default(),
            seed,
        }
    }

    pub fn synthetic_names(&self) -> Vec<String> {
        (0..self.synthetic_covariates)
            .map(|i| format!("syn_{i}"))
            .collect()
    }

    pub fn flags(&self, timestamp: &DateTime<FixedOffset>) -> CalendarFlags {
        use chrono::Timelike;
        let date = timestamp.date_naive();
        CalendarFlags {
            day_type: self.calendar.day_type(date),
            time_of_day: TimeOfDay::of_minute(timestamp.hour() * 60 + timestamp.minute()),
            period: self.academic.period(date),
        }
    }

    /// Draws `horizon` consecutive minutes starting at local midnight of `start`.
    pub fn generate(&self, horizon: usize) -> Result<Vec<ExogenousMinute>> {
        let offset = FixedOffset::east_opt(self.utc_offset_minutes * 60)
            .ok_or_else(|| Error::InvalidConfig("utc offset out of range".into()))?;
        let origin = offset
            .from_local_datetime(&self.start.and_hms_opt(0, 0, 0).expect("midnight"))
            .single()
            .ok_or_else(|| Error::InvalidConfig("ambiguous start".into()))?;
        let mut rng = seeded_rng(self.seed);
        let mut out = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let timestamp = origin + Duration::minutes(t as i64);
            let minute = (t % 1440) as u32;
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            let temperature = self.temperature.value(minute, draw());
            let humidity = self.humidity.value(minute, draw()).clamp(0.0, 100.0);
            let solar = self.solar.value(minute, draw()).max(0.0);
            let synthetic = (0..self.synthetic_covariates).map(|_| draw()).collect();
            out.push(ExogenousMinute {
                timestamp,
                temperature,
                humidity,
                solar_radiation: solar,
                synthetic,
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousMinute {
    pub timestamp: DateTime<FixedOffset>,
    pub temperature: f64,
    pub humidity: f64,
    pub solar_radiation: f64,
    pub synthetic: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn humidity_stays_in_range_and_flags_one_hot() {
        let mut exo = ExogenousModel::tropical(NaiveDate::from_ymd_opt(2017, 9, 12).unwrap(), 4);
        exo.humidity.noise_std = 30.0;
        exo.humidity.amplitude = 40.0;
        exo.academic.midterms.push(DateRange::new(
            NaiveDate::from_ymd_opt(2017, 9, 13).unwrap(),
            NaiveDate::from_ymd_opt(2017, 9, 13).unwrap(),
        ));
        let series = exo.generate(3 * 1440).unwrap();
        assert!(series.iter().all(|m| (0.0..=100.0).contains(&m.humidity)));
        assert!(series.iter().all(|m| m.solar_radiation >= 0.0));
        let f = exo.flags(&series[1440 + 13 * 60].timestamp);
        assert_eq!(f.period, AcademicPeriod::Midterm);
        assert_eq!(f.time_of_day, TimeOfDay::Afternoon);
        assert_eq!(f.day_type, DayType::Weekday);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let mut exo = ExogenousModel::tropical(NaiveDate::from_ymd_opt(2018, 2, 19).unwrap(), 11);
        exo.synthetic_covariates = 2;
        assert_eq!(exo.generate(500).unwrap(), exo.generate(500).unwrap());
        assert_eq!(exo.generate(10).unwrap()[3].synthetic.len(), 2);
    }
}
