use nalgebra::DMatrix;

use super::AgentSeries;
use crate::error::{Error, Result};
use crate::regression::{Column, DesignMatrix};

/// Maximum lag `D` shared by all agents and training window length `T`, in hours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagSpec {
    pub max_lag: usize,
    pub window_length: usize,
}

impl LagSpec {
    pub fn new(max_lag: usize, window_length: usize) -> Result<Self> {
        let spec = LagSpec {
            max_lag,
            window_length,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_lag == 0 {
            return Err(Error::invalid("max_lag must be at least 1"));
        }
        if self.window_length == 0 {
            return Err(Error::invalid("window_length must be at least 1"));
        }
        Ok(())
    }
}

fn check_coverage(series: &AgentSeries, start: i64, spec: &LagSpec) -> Result<()> {
    let needed_from = start - spec.max_lag as i64;
    let needed_to = start + spec.window_length as i64;
    if series.first_hour() > needed_from || series.end_hour() < needed_to {
        return Err(Error::InsufficientHistory {
            agent: series.agent_id.to_string(),
            needed_from,
            needed_to,
            available_from: series.first_hour(),
            available_to: series.end_hour(),
        });
    }
    Ok(())
}

/// Lagged regressor matrix over the window starting at the first series' `start_time`.
///
/// Layout is `[1 | agent₁ block | … | agent_N block]`. Within a block the
/// columns run from the oldest lag `D` to the newest lag 1, so row `t` of a
/// block reads `x_{t−D}, …, x_{t−1}`.
pub fn build_lag_matrix(
    series_list: &[AgentSeries],
    spec: &LagSpec,
    include_intercept: bool,
) -> Result<DesignMatrix> {
    spec.validate()?;
    let Some(first) = series_list.first() else {
        if include_intercept {
            return DesignMatrix::new(DMatrix::from_element(spec.window_length, 1, 1.0), vec![Column::Intercept]);
        }
        return Err(Error::invalid("no series and no intercept: empty design"));
    };
    let start = first.start_time();
    for s in series_list {
        if s.start_time() != start {
            return Err(Error::invalid(format!(
                "agent {} window starts at hour {}, expected {start}",
                s.agent_id,
                s.start_time()
            )));
        }
        check_coverage(s, start, spec)?;
    }

    let t = spec.window_length;
    let d = spec.max_lag;
    let offset = usize::from(include_intercept);
    let p = offset + series_list.len() * d;

    let mut columns = Vec::with_capacity(p);
    if include_intercept {
        columns.push(Column::Intercept);
    }
    let mut values = DMatrix::zeros(t, p);
    if include_intercept {
        values.column_mut(0).fill(1.0);
    }
    for (block, s) in series_list.iter().enumerate() {
        // Index of hour `start` in this series' storage.
        let base = (start - s.first_hour()) as usize;
        for pos in 0..d {
            let lag = d - pos;
            let col = offset + block * d + pos;
            columns.push(Column::lag(s.agent_id.clone(), lag));
            for row in 0..t {
                values[(row, col)] = s.values()[base + row - lag];
            }
        }
    }
    DesignMatrix::new(values, columns)
}

/// In-window values `y_t`, `t = start … start + T − 1`.
pub fn target_window(series: &AgentSeries, spec: &LagSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_coverage(series, series.start_time(), spec)?;
    let base = series.history();
    Ok(series.values()[base..base + spec.window_length].to_vec())
}
