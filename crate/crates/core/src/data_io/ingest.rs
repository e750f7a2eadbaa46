use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::timeseries::AgentSeries;

/// Share of dropped rows above which ingestion attaches a warning.
const DROP_WARNING_FRACTION: f64 = 0.10;

/// Which CSV columns hold the timestamp and each zone.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    pub timestamp_column: String,
    /// `(column name, zone id)` in output order.
    pub zones: Vec<(String, AgentId)>,
}

impl CsvSchema {
    /// Column names double as zone ids.
    pub fn identity(timestamp_column: &str, zones: &[&str]) -> Self {
        CsvSchema {
            timestamp_column: timestamp_column.to_string(),
            zones: zones.iter().map(|z| (z.to_string(), AgentId::new(*z))).collect(),
        }
    }

    /// `timestamp,DK1,DK2,SE1,SE2,SE3,SE4`.
    pub fn nordic() -> Self {
        Self::identity("timestamp", &["DK1", "DK2", "SE1", "SE2", "SE3", "SE4"])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide each zone by its maximum over the ingested rows.
    PerZoneMax,
}

/// Hourly zonal production. Timestamps are strictly increasing; gaps only
/// appear where rows were missing or dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct ZonalDataset {
    pub zones: Vec<AgentId>,
    pub timestamps: Vec<i64>,
    /// `values[z][k]` is zone `z` at `timestamps[k]`.
    pub values: Vec<Vec<f64>>,
}

impl ZonalDataset {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn zone(&self, id: &AgentId) -> Option<&[f64]> {
        self.zones.iter().position(|z| z == id).map(|k| self.values[k].as_slice())
    }

    /// Maximal runs of consecutive hours as `(first index, length)`.
    pub fn contiguous_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for k in 1..=self.timestamps.len() {
            if k == self.timestamps.len() || self.timestamps[k] != self.timestamps[k - 1] + 1 {
                if k > start {
                    runs.push((start, k - start));
                }
                start = k;
            }
        }
        runs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestReport {
    pub dataset: ZonalDataset,
    pub total_rows: usize,
    pub dropped_rows: usize,
    /// Set when more than 10% of rows were dropped.
    pub warning: Option<String>,
}

/// Parses an integer hour index or an ISO-8601 timestamp into an hour index.
pub fn parse_hour(raw: &str) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(h) = raw.parse::<i64>() {
        return Ok(h);
    }
    let seconds = if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        if dt.minute() != 0 || dt.second() != 0 {
            return Err(Error::invalid(format!("timestamp {raw} is not on the hour")));
        }
        dt.timestamp()
    } else {
        let naive = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
            .ok_or_else(|| Error::invalid(format!("unparseable timestamp {raw:?}")))?;
        if naive.minute() != 0 || naive.second() != 0 {
            return Err(Error::invalid(format!("timestamp {raw} is not on the hour")));
        }
        naive.and_utc().timestamp()
    };
    Ok(seconds.div_euclid(3600))
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || ["na", "nan", "null", "-"].contains(&raw.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}, column {column}: cannot parse {raw:?}")))?;
    Ok(v.is_finite().then_some(v))
}

/// Reads a zonal wind CSV. Rows with any missing zone value are dropped.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema, normalization: Normalization) -> Result<IngestReport> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("{}: missing column {name:?}", path.display())))
    };
    let ts_idx = find(&schema.timestamp_column)?;
    let zone_idx = schema
        .zones
        .iter()
        .map(|(col, _)| find(col))
        .collect::<Result<Vec<_>>>()?;

    let mut timestamps = Vec::new();
    let mut values = vec![Vec::new(); zone_idx.len()];
    let mut total_rows = 0;
    let mut dropped_rows = 0;
    let mut last_hour: Option<i64> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        total_rows += 1;
        let hour = parse_hour(record.get(ts_idx).unwrap_or(""))?;
        if let Some(prev) = last_hour {
            if hour <= prev {
                return Err(Error::invalid(format!(
                    "{}: timestamps not strictly increasing at data row {} ({hour} after {prev})",
                    path.display(),
                    row + 1
                )));
            }
        }
        last_hour = Some(hour);
        let cells = zone_idx
            .iter()
            .zip(&schema.zones)
            .map(|(&k, (col, _))| parse_cell(record.get(k).unwrap_or(""), row + 1, col))
            .collect::<Result<Vec<_>>>()?;
        if cells.iter().any(Option::is_none) {
            dropped_rows += 1;
            continue;
        }
        timestamps.push(hour);
        for (z, v) in cells.into_iter().enumerate() {
            values[z].push(v.expect("checked above"));
        }
    }

    if normalization == Normalization::PerZoneMax {
        for (z, col) in values.iter_mut().enumerate() {
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Err(Error::invalid(format!(
                    "zone {} has no positive values to normalize by",
                    schema.zones[z].1
                )));
            }
            for v in col.iter_mut() {
                *v /= max;
            }
        }
    }

    let warning = (total_rows > 0 && dropped_rows as f64 > DROP_WARNING_FRACTION * total_rows as f64).then(|| {
        format!("dropped {dropped_rows} of {total_rows} rows with missing values")
    });
    Ok(IngestReport {
        dataset: ZonalDataset {
            zones: schema.zones.iter().map(|(_, id)| id.clone()).collect(),
            timestamps,
            values,
        },
        total_rows,
        dropped_rows,
        warning,
    })
}

/// One series per zone covering `[start − max_lag, start + window)`, which
/// must be a run of consecutive hours in the dataset.
pub fn to_agent_series(dataset: &ZonalDataset, start: i64, window: usize, max_lag: usize) -> Result<Vec<AgentSeries>> {
    let needed_from = start - max_lag as i64;
    let needed_to = start + window as i64;
    let (available_from, available_to) = dataset
        .contiguous_runs()
        .into_iter()
        .map(|(i, n)| (dataset.timestamps[i], dataset.timestamps[i] + n as i64))
        .find(|&(a, b)| a <= start && start < b)
        .unwrap_or((start, start));
    if needed_from < available_from || needed_to > available_to {
        return Err(Error::InsufficientCoverage {
            needed_from,
            needed_to,
            available_from,
            available_to,
        });
    }
    let first = dataset
        .timestamps
        .binary_search(&needed_from)
        .expect("hour lies inside a contiguous run");
    let len = window + max_lag;
    dataset
        .zones
        .iter()
        .zip(&dataset.values)
        .map(|(zone, vals)| AgentSeries::new(zone.clone(), vals[first..first + len].to_vec(), max_lag, start))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_parsing() {
        assert_eq!(parse_hour("42").unwrap(), 42);
        assert_eq!(parse_hour("1970-01-01T05:00").unwrap(), 5);
        assert_eq!(parse_hour("1970-01-01 05:00:00").unwrap(), 5);
        assert_eq!(parse_hour("1970-01-01T06:00:00+01:00").unwrap(), 5);
        assert_eq!(parse_hour("2020-01-01T00:00:00Z").unwrap(), 438_288);
        assert!(parse_hour("1970-01-01T05:30").is_err());
        assert!(parse_hour("yesterday").is_err());
    }

    #[test]
    fn runs_split_at_gaps() {
        let ds = ZonalDataset {
            zones: vec![AgentId::new("z")],
            timestamps: vec![1, 2, 3, 5, 6, 9],
            values: vec![vec![0.0; 6]],
        };
        assert_eq!(ds.contiguous_runs(), vec![(0, 3), (3, 2), (5, 1)]);
    }

    #[test]
    fn window_inside_a_gap_is_rejected() {
        let ds = ZonalDataset {
            zones: vec![AgentId::new("z")],
            timestamps: vec![0, 1, 2, 3, 5, 6, 7, 8],
            values: vec![vec![1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0]],
        };
        let ok = to_agent_series(&ds, 6, 3, 1).unwrap();
        assert_eq!(ok[0].values(), &[6.0, 7.0, 8.0, 9.0]);
        assert_eq!(ok[0].start_time(), 6);
        match to_agent_series(&ds, 5, 3, 1) {
            Err(Error::InsufficientCoverage { needed_from: 4, available_from: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(to_agent_series(&ds, 0, 2, 1).is_err());
    }
}
