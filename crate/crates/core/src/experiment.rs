//! Experiment harness: method comparison and the u, T and two-seller sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agent::AgentId;
use crate::config::Scenario;
use crate::data_io::{write_outcome_table, write_summary_table, SweepPoint};
use crate::error::{Error, Result};
use crate::market::{clear_market, verify_viability, MarketConfig, MarketOutcome, ReservationSchedule};
use crate::regression::{ols_fit, Column};

/// One regression term under the three fitting methods.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientRow {
    /// `None` for the intercept.
    pub agent: Option<AgentId>,
    pub lag: Option<usize>,
    /// Generating coefficient, when the data are synthetic.
    pub truth: Option<f64>,
    /// Own-lags OLS; `None` for support features.
    pub ols_self: Option<f64>,
    pub ols_all: f64,
    pub lasso_all: f64,
}

impl CoefficientRow {
    pub fn term(&self) -> String {
        match (&self.agent, self.lag) {
            (Some(a), Some(l)) => format!("{a}[t-{l}]"),
            _ => "intercept".to_string(),
        }
    }
}

/// Share of neighbouring grid cells where a seller's payment did not rise
/// when the other seller's reservation went up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossMonotonicity {
    pub comparisons: usize,
    pub non_increasing: usize,
}

impl CrossMonotonicity {
    pub fn rate(&self) -> f64 {
        if self.comparisons == 0 {
            1.0
        } else {
            self.non_increasing as f64 / self.comparisons as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub clearings: usize,
    pub viability_rate: f64,
    pub mean_buyer_gain: f64,
    pub mean_buyer_gain_per_step: f64,
    pub cross_monotonicity: Option<CrossMonotonicity>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub scenario_id: String,
    /// Filled by the method comparison only.
    pub coefficients: Vec<CoefficientRow>,
    pub sweep: Vec<(SweepPoint, MarketOutcome)>,
    pub summary: ReportSummary,
}

/// Per (sweep point, seller) payment, payment per step and buyer gain per step.
pub const PER_STEP_COLUMNS: [&str; 7] = [
    "sweep_param",
    "sweep_value",
    "agent",
    "window",
    "payment",
    "payment_per_step",
    "buyer_gain_per_step",
];

pub const COEFFICIENT_COLUMNS: [&str; 6] = ["term", "truth", "ols_self", "ols_all", "lasso_all", "lag"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    fn new(scenario_id: &str, sweep: Vec<(SweepPoint, MarketOutcome)>) -> Result<Self> {
        for (point, outcome) in &sweep {
            let check = verify_viability(outcome);
            if !check.holds {
                // clear_market already refuses these; reaching here means the outcome was altered.
                return Err(Error::ViabilityViolation {
                    lhs: check.market_side,
                    rhs: check.baseline_side,
                    gap: check.gap,
                });
            }
            debug_assert!(outcome.viability, "{}={} not viable", point.param, point.value);
        }
        let n = sweep.len().max(1) as f64;
        let summary = ReportSummary {
            clearings: sweep.len(),
            viability_rate: sweep.iter().filter(|(_, o)| o.viability).count() as f64 / n,
            mean_buyer_gain: sweep.iter().map(|(_, o)| o.buyer_net_gain).sum::<f64>() / n,
            mean_buyer_gain_per_step: sweep.iter().map(|(_, o)| o.buyer_gain_per_step()).sum::<f64>() / n,
            cross_monotonicity: None,
        };
        Ok(ExperimentReport {
            scenario_id: scenario_id.to_string(),
            coefficients: Vec::new(),
            sweep,
            summary,
        })
    }

    /// Rows for [`PER_STEP_COLUMNS`].
    pub fn per_step_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (point, o) in &self.sweep {
            let t = o.window_length();
            let mut sellers: Vec<&AgentId> = Vec::new();
            for p in &o.payments {
                if !sellers.contains(&&p.agent_id) {
                    sellers.push(&p.agent_id);
                }
            }
            for a in sellers {
                rows.push(vec![
                    point.param.clone(),
                    point.value.clone(),
                    a.to_string(),
                    t.to_string(),
                    o.agent_payment(a).to_string(),
                    o.agent_payment_per_step(a).to_string(),
                    o.buyer_gain_per_step().to_string(),
                ]);
            }
        }
        rows
    }

    pub fn coefficient_rows(&self) -> Vec<Vec<String>> {
        self.coefficients
            .iter()
            .map(|r| {
                vec![
                    r.term(),
                    opt(r.truth),
                    opt(r.ols_self),
                    r.ols_all.to_string(),
                    r.lasso_all.to_string(),
                    r.lag.map(|l| l.to_string()).unwrap_or_default(),
                ]
            })
            .collect()
    }

    /// Writes `<stem>.csv` (outcome table), `<stem>_per_step.csv` and, when
    /// present, `<stem>_coefficients.csv` into `dir`. Returns the paths written.
    pub fn write_tables(&self, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let outcomes = dir.join(format!("{stem}.csv"));
        write_outcome_table(&self.sweep, &outcomes)?;
        written.push(outcomes);
        let per_step = dir.join(format!("{stem}_per_step.csv"));
        write_summary_table(&per_step, &PER_STEP_COLUMNS, &self.per_step_rows())?;
        written.push(per_step);
        if !self.coefficients.is_empty() {
            let coef = dir.join(format!("{stem}_coefficients.csv"));
            write_summary_table(&coef, &COEFFICIENT_COLUMNS, &self.coefficient_rows())?;
            written.push(coef);
        }
        Ok(written)
    }
}

fn clear_all(
    scenario: &Scenario,
    points: Vec<(SweepPoint, MarketConfig, ReservationSchedule)>,
) -> Result<Vec<(SweepPoint, MarketOutcome)>> {
    // Collecting into Result<Vec<_>> keeps the input order.
    points
        .into_par_iter()
        .map(|(point, config, schedule)| clear_market(&config, &scenario.series, &schedule).map(|o| (point, o)))
        .collect()
}

/// OLS on own lags, OLS on all features, and the cleared weighted lasso, on
/// the scenario's window and reservations.
pub fn run_method_comparison(scenario: &Scenario) -> Result<ExperimentReport> {
    let outcome = clear_market(&scenario.market, &scenario.series, &scenario.reservations)?;
    let ols_all = ols_fit(&outcome.market_design, &outcome.target)?;
    let truth_of = |agent: &AgentId, lag: usize| {
        scenario.truth.as_ref().map(|t| {
            t.iter()
                .find(|(a, l, _)| a == agent && *l == lag)
                .map_or(0.0, |(_, _, v)| *v)
        })
    };
    let coefficients = outcome
        .market_design
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let (agent, lag, truth, self_idx) = match col {
                // The generators are zero mean.
                Column::Intercept => (None, None, scenario.truth.as_ref().map(|_| 0.0), outcome.baseline_design.intercept_index()),
                Column::Lag { agent, lag } => (
                    Some(agent.clone()),
                    Some(*lag),
                    truth_of(agent, *lag),
                    outcome.baseline_design.column_index(agent, *lag),
                ),
            };
            CoefficientRow {
                agent,
                lag,
                truth,
                ols_self: self_idx.map(|k| outcome.baseline_beta.get(k)),
                ols_all: ols_all.get(j),
                lasso_all: outcome.market_beta.get(j),
            }
        })
        .collect();
    let mut report = ExperimentReport::new(&scenario.id, vec![(SweepPoint::new("clear", scenario.id.as_str()), outcome)])?;
    report.coefficients = coefficients;
    Ok(report)
}

/// One clearing per training window length; every T must fit the loaded series.
pub fn run_t_sweep(scenario: &Scenario, t_grid: &[usize]) -> Result<ExperimentReport> {
    if t_grid.is_empty() {
        return Err(Error::invalid("T grid is empty"));
    }
    let points = t_grid
        .iter()
        .map(|&t| Ok((SweepPoint::new("T", t), scenario.market.with_window(t)?, scenario.reservations.clone())))
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::new(&scenario.id, clear_all(scenario, points)?)
}

/// With `uniform`, every support feature gets reservation `u`; otherwise the
/// scenario's own schedule is scaled by `u`.
pub fn run_u_sweep(scenario: &Scenario, u_grid: &[f64], uniform: bool) -> Result<ExperimentReport> {
    if u_grid.is_empty() {
        return Err(Error::invalid("u grid is empty"));
    }
    if u_grid.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
        return Err(Error::invalid("u values must be finite and non-negative"));
    }
    let d = scenario.market.lag_spec.max_lag;
    let points = u_grid
        .iter()
        .map(|&u| {
            let schedule = if uniform {
                ReservationSchedule::uniform(&scenario.market.support_agents, d, u)?
            } else {
                let mut s = ReservationSchedule::new();
                for (agent, lag, base) in scenario.reservations.iter() {
                    s.set(agent.clone(), lag, base * u)?;
                }
                s
            };
            Ok((SweepPoint::new("u", u), scenario.market.clone(), schedule))
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::new(&scenario.id, clear_all(scenario, points)?)
}

/// `|grid_a| × |grid_b|` clearings, row-major in `grid_a`, with every other
/// seller held at `others_u`.
pub fn run_two_agent_grid(
    scenario: &Scenario,
    agent_a: &AgentId,
    agent_b: &AgentId,
    u_grid_a: &[f64],
    u_grid_b: &[f64],
    others_u: f64,
) -> Result<ExperimentReport> {
    let support = &scenario.market.support_agents;
    for a in [agent_a, agent_b] {
        if !support.contains(a) {
            return Err(Error::invalid(format!("{a} is not a support agent")));
        }
    }
    if agent_a == agent_b {
        return Err(Error::invalid("grid agents must differ"));
    }
    if u_grid_a.is_empty() || u_grid_b.is_empty() {
        return Err(Error::invalid("grid axes must be non-empty"));
    }
    let d = scenario.market.lag_spec.max_lag;
    let param = format!("u[{agent_a}]:u[{agent_b}]");
    let mut points = Vec::with_capacity(u_grid_a.len() * u_grid_b.len());
    for &ua in u_grid_a {
        for &ub in u_grid_b {
            let mut s = ReservationSchedule::uniform(support, d, others_u)?;
            s.set_agent(agent_a, d, ua)?;
            s.set_agent(agent_b, d, ub)?;
            points.push((SweepPoint::new(param.as_str(), format!("{ua}:{ub}")), scenario.market.clone(), s));
        }
    }
    let mut report = ExperimentReport::new(&scenario.id, clear_all(scenario, points)?)?;

    let nb = u_grid_b.len();
    let pay = |i: usize, j: usize, who: &AgentId| report.sweep[i * nb + j].1.agent_payment(who);
    let mut stats = CrossMonotonicity {
        comparisons: 0,
        non_increasing: 0,
    };
    for i in 0..u_grid_a.len() {
        for j in 0..nb {
            if j + 1 < nb {
                stats.comparisons += 1;
                stats.non_increasing += usize::from(pay(i, j + 1, agent_a) <= pay(i, j, agent_a));
            }
            if i + 1 < u_grid_a.len() {
                stats.comparisons += 1;
                stats.non_increasing += usize::from(pay(i + 1, j, agent_b) <= pay(i, j, agent_b));
            }
        }
    }
    report.summary.cross_monotonicity = Some(stats);
    Ok(report)
}
