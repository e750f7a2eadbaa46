//! Agent time series, lagged design matrices, and synthetic AR/VAR data.

mod lag;
mod synthetic;

pub use lag::{build_lag_matrix, target_window, LagSpec};
pub use synthetic::{generate_ar1, generate_var_dependent, SyntheticSpec, BURN_IN};

use crate::agent::AgentId;
use crate::error::{Error, Result};

/// One agent's hourly series.
///
/// `values[history + t]` is the sample at hour `start_time + t`; the first
/// `history` samples precede the training window and feed the lags.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSeries {
    pub agent_id: AgentId,
    values: Vec<f64>,
    history: usize,
    start_time: i64,
}

impl AgentSeries {
    pub fn new(agent_id: impl Into<AgentId>, values: Vec<f64>, history: usize, start_time: i64) -> Result<Self> {
        let agent_id = agent_id.into();
        if history > values.len() {
            return Err(Error::invalid(format!(
                "agent {agent_id}: history {history} exceeds series length {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("agent {agent_id}: non-finite value at index {i}")));
        }
        Ok(AgentSeries {
            agent_id,
            values,
            history,
            start_time,
        })
    }

    /// Series whose first sample is hour 0, with the window starting at hour `history`.
    pub fn from_values(agent_id: impl Into<AgentId>, values: Vec<f64>, history: usize) -> Result<Self> {
        Self::new(agent_id, values, history, history as i64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Hour of `values[0]`.
    pub fn first_hour(&self) -> i64 {
        self.start_time - self.history as i64
    }

    /// One past the last covered hour.
    pub fn end_hour(&self) -> i64 {
        self.first_hour() + self.values.len() as i64
    }

    pub fn at_hour(&self, hour: i64) -> Option<f64> {
        let idx = hour - self.first_hour();
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }

    /// The same samples re-indexed so the window starts `history` samples in.
    pub fn with_history(&self, history: usize) -> Result<Self> {
        let first = self.first_hour();
        Self::new(self.agent_id.clone(), self.values.clone(), history, first + history as i64)
    }
}
