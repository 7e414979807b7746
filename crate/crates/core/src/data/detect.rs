use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::Resource;
use crate::error::{Error, Result};
use crate::stats::{mean, population_variance};

/// One raw reading from a room sensor tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// Acceleration magnitude from the fan-mounted tag.
    pub acceleration: f64,
    pub temperature: f64,
    pub humidity: f64,
    pub illuminance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionThresholds {
    /// Fan is on when the acceleration standard deviation exceeds this.
    pub accel_std: f64,
    /// A/C is on when mean humidity and mean temperature are both below these.
    pub ac_humidity: f64,
    pub ac_temperature: f64,
    /// Light is on when mean illuminance exceeds this.
    pub illuminance: f64,
    pub min_window: usize,
    /// Which light the illuminance sensor watches.
    #[serde(default = "default_light")]
    pub light_resource: Resource,
}

fn default_light() -> Resource {
    Resource::DeskLight
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self {
            accel_std: 0.1,
            ac_humidity: 60.0,
            ac_temperature: 26.0,
            illuminance: 100.0,
            min_window: 10,
            light_resource: Resource::DeskLight,
        }
    }
}

/// Threshold rules turning a window of sensor samples into on/off states for
/// the fan, the A/C and the watched light.
pub fn detect_device_state(
    window: &[SensorSample],
    thresholds: &DetectionThresholds,
) -> Result<BTreeMap<Resource, bool>> {
    let t = thresholds;
    if !(t.accel_std > 0.0 && t.ac_humidity > 0.0 && t.ac_temperature > 0.0 && t.illuminance > 0.0)
    {
        return Err(Error::InvalidConfig(
            "detection thresholds must be positive".into(),
        ));
    }
    let min = t.min_window.max(1);
    if window.len() < min {
        return Err(Error::WindowTooShort {
            len: window.len(),
            min,
        });
    }
    let column = |f: fn(&SensorSample) -> f64| window.iter().map(f).collect::<Vec<_>>();
    let accel_std = population_variance(&column(|s| s.acceleration)).sqrt();
    let humidity = mean(&column(|s| s.humidity));
    let temperature = mean(&column(|s| s.temperature));
    let illuminance = mean(&column(|s| s.illuminance));

    let mut states = BTreeMap::new();
    states.insert(Resource::CeilingFan, accel_std > t.accel_std);
    states.insert(
        Resource::AirCon,
        humidity < t.ac_humidity && temperature < t.ac_temperature,
    );
    states.insert(t.light_resource, illuminance > t.illuminance);
    Ok(states)
}
