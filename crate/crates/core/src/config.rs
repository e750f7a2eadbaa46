//! TOML scenario files.
//!
//! ```toml
//! id = "nordic-dk1"
//! central_agent = "DK1"
//! max_lag = 3
//! window = 240
//! start = "2020-03-01T00:00"
//! output_dir = "out"
//!
//! [csv]
//! path = "wind.csv"
//! normalization = "per-zone-max"
//!
//! [reservations]
//! uniform = 0.1
//!
//! [sweep]
//! u_grid = [0.0, 0.05, 0.1, 0.2]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agent::AgentId;
use crate::data_io::{ingest_csv, parse_hour, to_agent_series, CsvSchema, Normalization};
use crate::error::{Error, Result};
use crate::market::{MarketConfig, ReservationSchedule};
use crate::regression::SolverSettings;
use crate::timeseries::{AgentSeries, LagSpec, SyntheticSpec};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    /// Overrides the synthetic generator seed when set.
    pub seed: Option<u64>,
    pub central_agent: Option<String>,
    /// Defaults to every other agent in the data.
    pub support_agents: Option<Vec<String>>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    /// First in-window hour for CSV data; defaults to the first hour with full lag history.
    pub start: Option<HourSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub synthetic: Option<SyntheticSpec>,
    pub csv: Option<CsvSource>,
    #[serde(default)]
    pub reservations: ReservationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub output_dir: Option<PathBuf>,
}

fn default_id() -> String {
    "scenario".to_string()
}
fn default_max_lag() -> usize {
    3
}
fn default_window() -> usize {
    240
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum HourSpec {
    Index(i64),
    Timestamp(String),
}

impl HourSpec {
    pub fn hour(&self) -> Result<i64> {
        match self {
            HourSpec::Index(h) => Ok(*h),
            HourSpec::Timestamp(s) => parse_hour(s),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverConfig {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    /// Zone columns, used as zone ids. Defaults to the six Nordic zones.
    pub zones: Option<Vec<String>>,
    /// Optional zone id → column name remapping.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_timestamp_column() -> String {
    "timestamp".to_string()
}

impl CsvSource {
    pub fn schema(&self) -> CsvSchema {
        let zones: Vec<String> = match &self.zones {
            Some(z) => z.clone(),
            None => CsvSchema::nordic().zones.into_iter().map(|(_, id)| id.to_string()).collect(),
        };
        CsvSchema {
            timestamp_column: self.timestamp_column.clone(),
            zones: zones
                .into_iter()
                .map(|z| {
                    let column = self.columns.get(&z).cloned().unwrap_or_else(|| z.clone());
                    (column, AgentId::new(z))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FeatureReservation {
    pub agent: String,
    pub lag: usize,
    pub u: f64,
}

/// Later layers override earlier ones: `uniform`, then `agents`, then `features`.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReservationConfig {
    pub uniform: Option<f64>,
    #[serde(default)]
    pub agents: BTreeMap<String, f64>,
    #[serde(default)]
    pub features: Vec<FeatureReservation>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub u_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<usize>>,
    pub agent_a: Option<String>,
    pub agent_b: Option<String>,
    pub u_grid_a: Option<Vec<f64>>,
    pub u_grid_b: Option<Vec<f64>>,
    /// Reservation of the sellers outside the two-agent grid.
    pub others_u: Option<f64>,
}

/// Default u grid; the top end is large enough to shrink every synthetic feature out.
pub const DEFAULT_U_GRID: [f64; 12] = [0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0, 5.0, 50.0];
pub const DEFAULT_T_GRID: [usize; 4] = [240, 480, 960, 2000];
pub const DEFAULT_OTHERS_U: f64 = 0.1;
/// Moderate uniform reservation used when a synthetic scenario sets none.
pub const DEFAULT_SYNTHETIC_U: f64 = 0.6;

fn strictly_increasing<T: PartialOrd>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// The synthetic study with its defaults: `P1` buys from `P2…P5`.
    pub fn synthetic_default() -> Self {
        ScenarioConfig {
            id: "synthetic".to_string(),
            seed: None,
            central_agent: Some("P1".to_string()),
            support_agents: None,
            max_lag: default_max_lag(),
            window: default_window(),
            start: None,
            solver: SolverConfig::default(),
            synthetic: Some(SyntheticSpec::default()),
            csv: None,
            reservations: ReservationConfig {
                uniform: Some(DEFAULT_SYNTHETIC_U),
                ..Default::default()
            },
            sweep: SweepConfig::default(),
            output_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; a relative CSV path is taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(csv), Some(dir)) = (cfg.csv.as_mut(), path.parent()) {
            if csv.path.is_relative() {
                csv.path = dir.join(&csv.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.synthetic, &self.csv) {
            (Some(_), Some(_)) => return Err(Error::Config("give either [synthetic] or [csv], not both".into())),
            (None, None) => return Err(Error::Config("no data source: add a [synthetic] or [csv] section".into())),
            _ => {}
        }
        LagSpec::new(self.max_lag, self.window)?;
        SolverSettings::new(self.solver.tolerance, self.solver.max_iterations)?;
        if let Some(g) = &self.sweep.u_grid {
            strictly_increasing("sweep.u_grid", g)?;
        }
        if let Some(g) = &self.sweep.t_grid {
            strictly_increasing("sweep.t_grid", g)?;
        }
        if let Some(g) = &self.sweep.u_grid_a {
            strictly_increasing("sweep.u_grid_a", g)?;
        }
        if let Some(g) = &self.sweep.u_grid_b {
            strictly_increasing("sweep.u_grid_b", g)?;
        }
        Ok(())
    }

    pub fn u_grid(&self) -> Vec<f64> {
        self.sweep.u_grid.clone().unwrap_or_else(|| DEFAULT_U_GRID.to_vec())
    }

    pub fn t_grid(&self) -> Vec<usize> {
        self.sweep.t_grid.clone().unwrap_or_else(|| DEFAULT_T_GRID.to_vec())
    }

    /// Loads the data and assembles the market. Series cover the longest
    /// window the scenario can ask for (its window or the largest T in the sweep).
    pub fn resolve(&self) -> Result<Scenario> {
        self.validate()?;
        let mut horizon = self.window;
        if let Some(g) = &self.sweep.t_grid {
            horizon = horizon.max(*g.iter().max().expect("validated non-empty"));
        }

        let (series, truth_spec) = if let Some(spec) = &self.synthetic {
            let mut spec = spec.clone();
            if let Some(seed) = self.seed {
                spec.seed = seed;
            }
            (spec.generate(horizon, self.max_lag)?, Some(spec))
        } else {
            let src = self.csv.as_ref().expect("validated source");
            let report = ingest_csv(&src.path, &src.schema(), src.normalization)?;
            let ds = &report.dataset;
            let start = match &self.start {
                Some(h) => h.hour()?,
                None => {
                    let first = *ds
                        .timestamps
                        .first()
                        .ok_or_else(|| Error::invalid(format!("{} has no complete rows", src.path.display())))?;
                    first + self.max_lag as i64
                }
            };
            (to_agent_series(ds, start, horizon, self.max_lag)?, None)
        };

        let agents: Vec<AgentId> = series.iter().map(|s| s.agent_id.clone()).collect();
        let central = AgentId::new(self.central_agent.clone().unwrap_or_else(|| agents[0].to_string()));
        if !agents.contains(&central) {
            return Err(Error::Config(format!("central agent {central} not found in the data")));
        }
        let support: Vec<AgentId> = match &self.support_agents {
            Some(list) => list.iter().map(|s| AgentId::new(s.as_str())).collect(),
            None => agents.iter().filter(|a| **a != central).cloned().collect(),
        };
        if let Some(missing) = support.iter().find(|a| !agents.contains(a)) {
            return Err(Error::Config(format!("support agent {missing} not found in the data")));
        }
        let market = MarketConfig::new(
            central.clone(),
            support,
            LagSpec::new(self.max_lag, self.window)?,
            SolverSettings::new(self.solver.tolerance, self.solver.max_iterations)?,
        )?;
        let reservations = self.reservation_schedule(&market)?;
        let truth = truth_spec.map(|s| s.true_coefficients(&central));
        Ok(Scenario {
            id: self.id.clone(),
            market,
            series,
            reservations,
            truth,
        })
    }

    fn reservation_schedule(&self, market: &MarketConfig) -> Result<ReservationSchedule> {
        let d = market.lag_spec.max_lag;
        let r = &self.reservations;
        let mut schedule = ReservationSchedule::uniform(&market.support_agents, d, r.uniform.unwrap_or(0.0))?;
        for (agent, &u) in &r.agents {
            let id = AgentId::new(agent.as_str());
            if !market.support_agents.contains(&id) {
                return Err(Error::Config(format!("reservation for {agent}, who is not a support agent")));
            }
            schedule.set_agent(&id, d, u)?;
        }
        for f in &r.features {
            let id = AgentId::new(f.agent.as_str());
            if !market.support_agents.contains(&id) || f.lag == 0 || f.lag > d {
                return Err(Error::Config(format!(
                    "reservation for {} lag {} does not match a support feature",
                    f.agent, f.lag
                )));
            }
            schedule.set(id, f.lag, f.u)?;
        }
        Ok(schedule)
    }
}

/// A scenario with its data loaded and market assembled.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub market: MarketConfig,
    pub series: Vec<AgentSeries>,
    pub reservations: ReservationSchedule,
    /// Generating coefficients `(agent, lag, value)` of the buyer's series, for synthetic data.
    pub truth: Option<Vec<(AgentId, usize, f64)>>,
}

impl Scenario {
    /// Scenario over in-memory series with no reservations.
    pub fn from_series(id: impl Into<String>, market: MarketConfig, series: Vec<AgentSeries>) -> Self {
        Scenario {
            id: id.into(),
            market,
            series,
            reservations: ReservationSchedule::new(),
            truth: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_synthetic_file() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            id = "s"
            seed = 3
            central_agent = "P2"
            max_lag = 2
            window = 100
            [solver]
            tolerance = 1e-9
            [synthetic]
            own_phi = 0.1
            [reservations]
            uniform = 0.2
            agents = { P3 = 0.5 }
            features = [{ agent = "P4", lag = 1, u = 0.05 }]
            [sweep]
            u_grid = [0.0, 0.1]
            t_grid = [100, 200]
            "#,
        )
        .unwrap();
        let sc = cfg.resolve().unwrap();
        assert_eq!(sc.market.central_agent, AgentId::new("P2"));
        assert_eq!(sc.market.support_agents.len(), 4);
        assert!(sc.series.iter().all(|s| s.len() == 202));
        assert_eq!(sc.reservations.get(&AgentId::new("P3"), 2), 0.5);
        assert_eq!(sc.reservations.get(&AgentId::new("P4"), 1), 0.05);
        assert_eq!(sc.reservations.get(&AgentId::new("P4"), 2), 0.2);
        assert_eq!(sc.truth.unwrap(), vec![(AgentId::new("P2"), 1, 0.85)]);
    }

    #[test]
    fn rejects_bad_sources_and_grids() {
        assert!(ScenarioConfig::from_toml_str("window = 10").is_err());
        assert!(ScenarioConfig::from_toml_str("[synthetic]\n[csv]\npath = \"x.csv\"").is_err());
        assert!(ScenarioConfig::from_toml_str("[synthetic]\n[sweep]\nu_grid = [0.2, 0.1]").is_err());
        assert!(ScenarioConfig::from_toml_str("[synthetic]\n[sweep]\nt_grid = []").is_err());
        assert!(ScenarioConfig::from_toml_str("[synthetic]\nbogus = 1").is_err());
        let cfg = ScenarioConfig::from_toml_str("central_agent = \"P7\"\n[synthetic]").unwrap();
        assert!(cfg.resolve().is_err());
    }
}
