use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ZonalDataset;
use crate::error::{Error, Result};
use crate::market::MarketOutcome;
use crate::timeseries::AgentSeries;

/// Header of the outcome table.
pub const OUTCOME_COLUMNS: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "agent",
    "lag",
    "coefficient",
    "reservation",
    "payment",
    "baseline_mse",
    "market_mse",
    "buyer_net_gain",
];

/// Label of one point in a sweep, e.g. `("u", "0.2")` or `("T", "480")`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepPoint {
    pub param: String,
    pub value: String,
}

impl SweepPoint {
    pub fn new(param: impl Into<String>, value: impl ToString) -> Self {
        SweepPoint {
            param: param.into(),
            value: value.to_string(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_table(path: &Path, comment: Option<&str>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = create(path)?;
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a plain CSV table with the given header.
pub fn write_summary_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_table(path.as_ref(), None, header, rows)
}

/// One row per (sweep point, seller, lag) and one buyer row per sweep point.
///
/// The buyer row carries the central agent's id, empty lag, coefficient and
/// reservation, and the total payment in `payment`.
pub fn write_outcome_table(outcomes: &[(SweepPoint, MarketOutcome)], path: impl AsRef<Path>) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no outcomes to write"));
    }
    let mut rows = Vec::new();
    for (point, outcome) in outcomes {
        let shared = [
            outcome.baseline_loss.mse.to_string(),
            outcome.market_loss.mse.to_string(),
            outcome.buyer_net_gain.to_string(),
        ];
        for p in &outcome.payments {
            let mut row = vec![
                point.param.clone(),
                point.value.clone(),
                p.agent_id.to_string(),
                p.lag.to_string(),
                p.coefficient.to_string(),
                p.reservation.to_string(),
                p.amount.to_string(),
            ];
            row.extend(shared.iter().cloned());
            rows.push(row);
        }
        let mut buyer = vec![
            point.param.clone(),
            point.value.clone(),
            outcome.central_agent.to_string(),
            String::new(),
            String::new(),
            String::new(),
            outcome.total_payment().to_string(),
        ];
        buyer.extend(shared);
        rows.push(buyer);
    }
    let comment = format!(
        "columns: {}; seller rows per (sweep point, agent, lag), then one buyer row with total payment",
        OUTCOME_COLUMNS.join(",")
    );
    write_table(path.as_ref(), Some(&comment), &OUTCOME_COLUMNS, &rows)
}

/// Writes series in the ingestion layout, timestamps as hour indices.
pub fn write_series_csv(series: &[AgentSeries], path: impl AsRef<Path>) -> Result<()> {
    let Some(first) = series.first() else {
        return Err(Error::invalid("no series to write"));
    };
    if let Some(bad) = series
        .iter()
        .find(|s| s.len() != first.len() || s.first_hour() != first.first_hour())
    {
        return Err(Error::invalid(format!("series {} is not aligned with {}", bad.agent_id, first.agent_id)));
    }
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.iter().map(|s| s.agent_id.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..first.len())
        .map(|k| {
            std::iter::once((first.first_hour() + k as i64).to_string())
                .chain(series.iter().map(|s| s.values()[k].to_string()))
                .collect()
        })
        .collect();
    write_table(path.as_ref(), None, &header, &rows)
}

pub fn write_dataset_csv(dataset: &ZonalDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["timestamp".to_string()];
    header.extend(dataset.zones.iter().map(|z| z.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = dataset
        .timestamps
        .iter()
        .enumerate()
        .map(|(k, ts)| {
            std::iter::once(ts.to_string())
                .chain(dataset.values.iter().map(|z| z[k].to_string()))
                .collect()
        })
        .collect();
    write_table(path.as_ref(), None, &header, &rows)
}
