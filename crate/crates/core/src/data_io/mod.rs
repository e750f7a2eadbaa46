//! Zonal wind CSV ingestion and result tables.
//!
//! Input files have a header row with a timestamp column followed by one
//! column per zone, e.g. `timestamp,DK1,DK2,SE1,SE2,SE3,SE4`. Timestamps are
//! either integer hour indices or ISO-8601 hours (`2020-01-01T13:00`,
//! optionally with seconds and an offset); naive times are read as UTC.
//! Values use `.` as decimal separator. A Nord Pool export can be brought to
//! this shape by keeping the delivery-hour column and the per-area wind
//! production columns and renaming the header.

mod ingest;
mod output;

pub use ingest::{
    ingest_csv, parse_hour, to_agent_series, CsvSchema, IngestReport, Normalization, ZonalDataset,
};
pub use output::{
    write_dataset_csv, write_outcome_table, write_series_csv,
    write_summary_table, SweepPoint, OUTCOME_COLUMNS,
};
