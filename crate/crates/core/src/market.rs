//! Market clearing.
//!
//! The buyer's baseline is an OLS fit on its own lags. With support data,
//! the operator solves a weighted lasso where seller `i`'s lag-`ℓ` feature
//! carries penalty `λ = (T/2)·u` and the buyer's own features carry none.
//! Each kept feature is paid `|u·β|`, and the payments add up to the lasso
//! term. Since the baseline coefficients (padded with zeros) are feasible
//! for the lasso at the same loss, the lasso optimum cannot be worse: the
//! buyer's loss plus payments stays at or below its baseline loss.

use std::collections::{BTreeMap, HashSet};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::regression::{
    lasso_loss, mse, ols_fit, weighted_lasso_solve, CoefficientVector, Column, DesignMatrix,
    LossReport, PenaltyVector, SolverSettings,
};
use crate::timeseries::{build_lag_matrix, target_window, AgentSeries, LagSpec};

/// Monetary value of one unit of MSE. Fixed at 1.
pub const LOSS_SCALE: f64 = 1.0;

/// Slack allowed in the viability inequality for finite solver precision.
pub const VIABILITY_TOLERANCE: f64 = 1e-6;

/// Sellers' reservation prices `u` per `(agent, lag)`. Absent entries mean `u = 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReservationSchedule {
    entries: BTreeMap<(AgentId, usize), f64>,
}

impl ReservationSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every lag `1..=max_lag` of every listed agent priced at `u`.
    pub fn uniform(agents: &[AgentId], max_lag: usize, u: f64) -> Result<Self> {
        let mut schedule = Self::new();
        for agent in agents {
            schedule.set_agent(agent, max_lag, u)?;
        }
        Ok(schedule)
    }

    pub fn set(&mut self, agent: impl Into<AgentId>, lag: usize, u: f64) -> Result<()> {
        let agent = agent.into();
        if !(u >= 0.0 && u.is_finite()) {
            return Err(Error::invalid(format!(
                "reservation for {agent} lag {lag} must be finite and >= 0, got {u}"
            )));
        }
        if lag == 0 {
            return Err(Error::invalid(format!("reservation for {agent} has lag 0")));
        }
        self.entries.insert((agent, lag), u);
        Ok(())
    }

    pub fn set_agent(&mut self, agent: &AgentId, max_lag: usize, u: f64) -> Result<()> {
        for lag in 1..=max_lag {
            self.set(agent.clone(), lag, u)?;
        }
        Ok(())
    }

    pub fn get(&self, agent: &AgentId, lag: usize) -> f64 {
        self.entries.get(&(agent.clone(), lag)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentId, usize, f64)> {
        self.entries.iter().map(|((a, l), u)| (a, *l, *u))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Who buys, who sells, and how the analytics task is set up.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketConfig {
    pub central_agent: AgentId,
    pub support_agents: Vec<AgentId>,
    pub lag_spec: LagSpec,
    pub solver: SolverSettings,
}

impl MarketConfig {
    pub fn new(
        central_agent: impl Into<AgentId>,
        support_agents: Vec<AgentId>,
        lag_spec: LagSpec,
        solver: SolverSettings,
    ) -> Result<Self> {
        let config = MarketConfig {
            central_agent: central_agent.into(),
            support_agents,
            lag_spec,
            solver,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.lag_spec.validate()?;
        self.solver.validate()?;
        if self.support_agents.contains(&self.central_agent) {
            return Err(Error::invalid(format!(
                "central agent {} is also listed as a support agent",
                self.central_agent
            )));
        }
        let mut seen = HashSet::new();
        for a in &self.support_agents {
            if !seen.insert(a) {
                return Err(Error::invalid(format!("support agent {a} listed twice")));
            }
        }
        Ok(())
    }

    pub fn loss_scale(&self) -> f64 {
        LOSS_SCALE
    }

    /// Same market with a different training window.
    pub fn with_window(&self, window_length: usize) -> Result<Self> {
        let mut c = self.clone();
        c.lag_spec = LagSpec::new(self.lag_spec.max_lag, window_length)?;
        Ok(c)
    }
}

/// Payment to one seller for one lag feature.
#[derive(Clone, Debug, PartialEq)]
pub struct PaymentRecord {
    pub agent_id: AgentId,
    pub lag: usize,
    pub coefficient: f64,
    pub reservation: f64,
    /// `|reservation × coefficient|`.
    pub amount: f64,
}

#[derive(Clone, Debug)]
pub struct MarketOutcome {
    pub central_agent: AgentId,
    /// Own-lags design `[1 | X_c]`.
    pub baseline_design: DesignMatrix,
    /// All-agents design `[1 | X_c | X_support…]`.
    pub market_design: DesignMatrix,
    pub target: Vec<f64>,
    pub penalties: PenaltyVector,
    pub baseline_beta: CoefficientVector,
    pub market_beta: CoefficientVector,
    pub baseline_loss: LossReport,
    pub market_loss: LossReport,
    /// One record per support feature, in design column order.
    pub payments: Vec<PaymentRecord>,
    /// `baseline mse − market mse − Σ payments`.
    pub buyer_net_gain: f64,
    pub viability: bool,
    pub solver_sweeps: usize,
}

impl MarketOutcome {
    pub fn window_length(&self) -> usize {
        self.target.len()
    }

    pub fn total_payment(&self) -> f64 {
        self.payments.iter().map(|p| p.amount).sum()
    }

    pub fn agent_payment(&self, agent: &AgentId) -> f64 {
        self.payments
            .iter()
            .filter(|p| &p.agent_id == agent)
            .map(|p| p.amount)
            .sum()
    }

    /// Payment spread over the window, treating `|u·β|` as a per-window amount.
    pub fn agent_payment_per_step(&self, agent: &AgentId) -> f64 {
        self.agent_payment(agent) / self.window_length() as f64
    }

    /// Per-step MSE reduction minus per-step payments.
    pub fn buyer_gain_per_step(&self) -> f64 {
        self.baseline_loss.mse - self.market_loss.mse - self.total_payment() / self.window_length() as f64
    }

    pub fn coefficient(&self, agent: &AgentId, lag: usize) -> Option<f64> {
        self.market_design
            .column_index(agent, lag)
            .map(|j| self.market_beta.get(j))
    }
}

/// Penalty per design column: 0 for the intercept and the buyer's own
/// lags, `(T/2)·u` for seller features.
pub fn penalties_from_reservations(
    config: &MarketConfig,
    reservations: &ReservationSchedule,
    design: &DesignMatrix,
) -> Result<PenaltyVector> {
    for (agent, lag, _) in reservations.iter() {
        if *agent == config.central_agent {
            return Err(Error::invalid(format!(
                "reservation given for the central agent's own feature {agent} lag {lag}"
            )));
        }
        if design.column_index(agent, lag).is_none() {
            return Err(Error::invalid(format!(
                "reservation for {agent} lag {lag} has no matching design column"
            )));
        }
    }
    let half_t = design.nrows() as f64 / 2.0;
    let values = design
        .columns()
        .iter()
        .map(|col| match col {
            Column::Intercept => Ok(0.0),
            Column::Lag { agent, .. } if *agent == config.central_agent => Ok(0.0),
            Column::Lag { agent, lag } => {
                if !config.support_agents.contains(agent) {
                    return Err(Error::invalid(format!(
                        "design column for {agent} who is neither buyer nor seller"
                    )));
                }
                Ok(half_t * reservations.get(agent, *lag))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PenaltyVector::new(values)
}

fn find_series<'a>(all: &'a [AgentSeries], id: &AgentId) -> Result<&'a AgentSeries> {
    all.iter()
        .find(|s| &s.agent_id == id)
        .ok_or_else(|| Error::invalid(format!("no series for agent {id}")))
}

/// Runs one market: baseline OLS, weighted-lasso clearing, payments, and the
/// viability check.
pub fn clear_market(
    config: &MarketConfig,
    all_series: &[AgentSeries],
    reservations: &ReservationSchedule,
) -> Result<MarketOutcome> {
    config.validate()?;
    let central = find_series(all_series, &config.central_agent)?;
    let mut participants = vec![central.clone()];
    for id in &config.support_agents {
        participants.push(find_series(all_series, id)?.clone());
    }

    let spec = &config.lag_spec;
    let target = target_window(central, spec)?;
    let baseline_design = build_lag_matrix(std::slice::from_ref(central), spec, true)?;
    let market_design = build_lag_matrix(&participants, spec, true)?;

    let baseline_beta = ols_fit(&baseline_design, &target)?;
    let penalties = penalties_from_reservations(config, reservations, &market_design)?;

    // Start from the baseline fit so every sweep stays at or below baseline loss.
    let mut warm = vec![0.0; market_design.ncols()];
    for (k, col) in baseline_design.columns().iter().enumerate() {
        let j = match col {
            Column::Intercept => market_design.intercept_index(),
            Column::Lag { agent, lag } => market_design.column_index(agent, *lag),
        }
        .expect("baseline columns are a subset of market columns");
        warm[j] = baseline_beta.get(k);
    }
    let solution = weighted_lasso_solve(
        &market_design,
        &target,
        &penalties,
        &config.solver,
        Some(&CoefficientVector::new(warm)),
    )?;
    let market_beta = solution.coefficients;

    let payments: Vec<PaymentRecord> = market_design
        .columns()
        .iter()
        .enumerate()
        .filter_map(|(j, col)| match col {
            Column::Lag { agent, lag } if *agent != config.central_agent => {
                let coefficient = market_beta.get(j);
                let reservation = reservations.get(agent, *lag);
                Some(PaymentRecord {
                    agent_id: agent.clone(),
                    lag: *lag,
                    coefficient,
                    reservation,
                    amount: (reservation * coefficient).abs(),
                })
            }
            _ => None,
        })
        .collect();

    let baseline_loss = lasso_loss(
        &baseline_design,
        &PenaltyVector::zeros(baseline_design.ncols()),
        &baseline_beta,
        &target,
    )?;
    let market_loss = lasso_loss(&market_design, &penalties, &market_beta, &target)?;
    let total: f64 = payments.iter().map(|p| p.amount).sum();

    let outcome = MarketOutcome {
        central_agent: config.central_agent.clone(),
        buyer_net_gain: baseline_loss.mse - market_loss.mse - total,
        viability: market_loss.lasso_loss <= baseline_loss.mse + VIABILITY_TOLERANCE,
        baseline_design,
        market_design,
        target,
        penalties,
        baseline_beta,
        market_beta,
        baseline_loss,
        market_loss,
        payments,
        solver_sweeps: solution.sweeps,
    };

    let check = verify_viability(&outcome);
    if !outcome.viability || !check.holds {
        return Err(Error::ViabilityViolation {
            lhs: check.market_side,
            rhs: check.baseline_side,
            gap: check.gap,
        });
    }
    Ok(outcome)
}

/// Both sides of the buyer-viability inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViabilityCheck {
    pub holds: bool,
    /// Market MSE plus total payments.
    pub market_side: f64,
    /// Baseline (own-lags OLS) MSE.
    pub baseline_side: f64,
    /// `market_side − baseline_side`; non-positive when the buyer is no worse off.
    pub gap: f64,
    pub tolerance: f64,
}

/// Recomputes the buyer's losses from the stored matrices and coefficients
/// and checks `market mse + Σ payments ≤ baseline mse + tolerance`.
pub fn verify_viability(outcome: &MarketOutcome) -> ViabilityCheck {
    let market_mse = mse(&outcome.market_design, &outcome.market_beta, &outcome.target);
    let baseline_mse = mse(&outcome.baseline_design, &outcome.baseline_beta, &outcome.target);
    let paid: f64 = outcome.payments.iter().map(|p| p.amount).sum();
    match (market_mse, baseline_mse) {
        (Ok(m), Ok(b)) => {
            let market_side = m + paid;
            let gap = market_side - b;
            ViabilityCheck {
                holds: gap <= VIABILITY_TOLERANCE,
                market_side,
                baseline_side: b,
                gap,
                tolerance: VIABILITY_TOLERANCE,
            }
        }
        _ => ViabilityCheck {
            holds: false,
            market_side: f64::NAN,
            baseline_side: f64::NAN,
            gap: f64::NAN,
            tolerance: VIABILITY_TOLERANCE,
        },
    }
}
