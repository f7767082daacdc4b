//! Configuration files, binary snapshots and reports.

pub mod config;
pub mod report;
pub mod snapshot;

pub use config::{load_config, parse_config, ConfigDocument, Value, ValueKind};
pub use report::{emit_report, to_csv, to_json, write_campaign_outputs, CsvTable, Format};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotHeader};
