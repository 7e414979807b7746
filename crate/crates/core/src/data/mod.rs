//! Per-minute telemetry: schema, ingestion, device-state detection, baselines,
//! points accounting and period splits.

mod baseline;
mod detect;
mod ingest;
mod points;
mod record;
mod split;

pub use baseline::{compute_baselines, daily_usage_totals, Baselines, DayBaseline};
pub use detect::{detect_device_state, DetectionThresholds, SensorSample};
pub use ingest::{ingest_minutes, write_minutes, IngestOptions, SchemaMapping};
pub use points::{compute_points, daily_points};
pub use record::{
    Calendar, DateRange, DayType, ExternalReadings, GameConfig, IndoorReadings, MinuteRecord,
    MinuteTable, OptionalColumn, Resource, TableSchema,
};
pub use split::split_periods;
