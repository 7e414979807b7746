use std::collections::BTreeMap;

use super::record::{DayType, GameConfig, Resource};
use crate::error::{Error, Result};

/// Points for one resource-day: `s * (b - u) / b`.
///
/// Savings relative to the baseline `b` earn points scaled by the booster `s`;
/// using more than the baseline yields negative points.
pub fn compute_points(baseline: f64, usage: f64, booster: f64) -> Result<f64> {
    if !(baseline > 0.0) || !baseline.is_finite() {
        return Err(Error::InvalidBaseline(baseline));
    }
    if !(booster > 0.0) || !booster.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "booster must be positive, got {booster}"
        )));
    }
    if !(usage >= 0.0) || !usage.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "usage must be nonnegative, got {usage}"
        )));
    }
    Ok(booster * (baseline - usage) / baseline)
}

/// Sum of per-resource points for one day. Resources without a configured
/// baseline earn nothing.
pub fn daily_points(
    game: &GameConfig,
    day: DayType,
    usage: &BTreeMap<Resource, f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (&res, &u) in usage {
        if let Some(b) = game.baseline(res, day) {
            total += compute_points(b, u, game.booster(res))?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(compute_points(100.0, 60.0, 10.0).unwrap(), 4.0);
        assert_eq!(compute_points(100.0, 100.0, 5.0).unwrap(), 0.0);
        assert_eq!(compute_points(100.0, 150.0, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn invalid_baseline() {
        assert!(matches!(
            compute_points(0.0, 1.0, 1.0),
            Err(Error::InvalidBaseline(_))
        ));
        assert!(matches!(
            compute_points(-3.0, 1.0, 1.0),
            Err(Error::InvalidBaseline(_))
        ));
    }

    proptest! {
        #[test]
        fn zero_usage_earns_the_booster(b in 1e-3f64..1e4, s in 1e-3f64..1e3) {
            prop_assert!((compute_points(b, 0.0, s).unwrap() - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn linear_in_booster(b in 1.0f64..1e3, u in 0.0f64..2e3, s in 0.1f64..50.0, k in 0.1f64..10.0) {
            let p1 = compute_points(b, u, s).unwrap();
            let pk = compute_points(b, u, k * s).unwrap();
            prop_assert!((pk - k * p1).abs() <= 1e-9 * (1.0 + pk.abs()));
        }
    }
}
