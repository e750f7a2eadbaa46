//! Test oracles written without the crate's solver code.
#![allow(dead_code)]

use lasso_market::market::{clear_market, MarketConfig, MarketOutcome, ReservationSchedule};
use lasso_market::regression::{DesignMatrix, SolverSettings};
use lasso_market::timeseries::{AgentSeries, LagSpec, SyntheticSpec};
use lasso_market::AgentId;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(1/T)‖y − Xβ‖² + (2/T)Σ λ_j |β_j|`, summed term by term.
pub fn objective(x: &DMatrix<f64>, y: &[f64], lambda: &[f64], beta: &[f64]) -> f64 {
    let t = x.nrows();
    let mut sse = 0.0;
    for i in 0..t {
        let mut fit = 0.0;
        for j in 0..x.ncols() {
            fit += x[(i, j)] * beta[j];
        }
        sse += (y[i] - fit).powi(2);
    }
    let pen: f64 = lambda.iter().zip(beta).map(|(l, b)| l * b.abs()).sum();
    sse / t as f64 + 2.0 * pen / t as f64
}

fn shrink(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

fn spectral_norm_sq(x: &DMatrix<f64>) -> f64 {
    // Power iteration on XᵀX.
    let g = x.transpose() * x;
    let mut v = DVector::from_element(g.ncols(), 1.0);
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = &g * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / n;
        if (n - est).abs() <= 1e-14 * n {
            return n;
        }
        est = n;
    }
    est
}

/// FISTA with gradient restarts on the weighted-lasso objective. Returns the
/// best iterate and its objective.
pub fn prox_gradient(x: &DMatrix<f64>, y: &[f64], lambda: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let t = x.nrows() as f64;
    let p = x.ncols();
    let yv = DVector::from_column_slice(y);
    // Gradient of the smooth part is (2/T)Xᵀ(Xβ − y); its Lipschitz constant is (2/T)σ²_max.
    let lip = 2.0 * spectral_norm_sq(x) / t * 1.0001 + 1e-300;
    let step = 1.0 / lip;
    let thresh: Vec<f64> = lambda.iter().map(|l| 2.0 * l / t * step).collect();

    let mut beta = DVector::zeros(p);
    let mut z = beta.clone();
    let mut mom = 1.0f64;
    let mut best = (beta.as_slice().to_vec(), objective(x, y, lambda, beta.as_slice()));
    let mut stall = 0;
    for _ in 0..max_iter {
        let grad = x.transpose() * (x * &z - &yv) * (2.0 / t);
        let mut next = DVector::zeros(p);
        for j in 0..p {
            next[j] = shrink(z[j] - step * grad[j], thresh[j]);
        }
        let mom_next = 0.5 * (1.0 + (1.0 + 4.0 * mom * mom).sqrt());
        let diff = &next - &beta;
        // Restart momentum when it points uphill.
        if (&z - &next).dot(&diff) > 0.0 {
            mom = 1.0;
            z = next.clone();
        } else {
            z = &next + diff * ((mom - 1.0) / mom_next);
            mom = mom_next;
        }
        beta = next;
        let f = objective(x, y, lambda, beta.as_slice());
        if f < best.1 - 1e-16 * best.1.abs().max(1.0) {
            best = (beta.as_slice().to_vec(), f);
            stall = 0;
        } else {
            stall += 1;
            if stall > 2000 {
                break;
            }
        }
    }
    best
}

/// Largest violation of the lasso optimality conditions, in `(2/T)`-scaled units.
pub fn kkt_violation(x: &DMatrix<f64>, y: &[f64], lambda: &[f64], beta: &[f64]) -> f64 {
    let t = x.nrows() as f64;
    let fit = x * DVector::from_column_slice(beta);
    let mut worst: f64 = 0.0;
    for j in 0..x.ncols() {
        let mut g = 0.0;
        for i in 0..x.nrows() {
            g += x[(i, j)] * (y[i] - fit[i]);
        }
        g *= 2.0 / t;
        let l = 2.0 * lambda[j] / t;
        let v = if beta[j] == 0.0 {
            (g.abs() - l).max(0.0)
        } else {
            (g - l * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Least squares through the normal equations with a Cholesky factor.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let g = x.transpose() * x;
    let b = x.transpose() * DVector::from_column_slice(y);
    g.cholesky().expect("well-conditioned design").solve(&b).as_slice().to_vec()
}

pub fn design(dm: &DesignMatrix) -> DMatrix<f64> {
    dm.values().clone()
}

/// A random synthetic market: `n_agents` agents, one of them the buyer.
#[derive(Clone, Debug)]
pub struct RandomScenario {
    pub config: MarketConfig,
    pub series: Vec<AgentSeries>,
    pub reservations: ReservationSchedule,
}

impl RandomScenario {
    pub fn clear(&self) -> lasso_market::Result<MarketOutcome> {
        clear_market(&self.config, &self.series, &self.reservations)
    }
}

/// Draws a scenario with `N` agents, max lag `D`, window `T`, and each
/// support feature's reservation uniform in `[0, u_max]`.
pub fn random_scenario(seed: u64, n: usize, d: usize, t: usize, u_max: f64) -> RandomScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n - 1;
    let spec = SyntheticSpec {
        ar_coefficients: (0..k).map(|_| rng.random_range(-0.9..0.9)).collect(),
        noise_stds: (0..k).map(|_| rng.random_range(0.3..2.0)).collect(),
        cross_coefficients: (0..k).map(|_| rng.random_range(-0.5..0.5)).collect(),
        own_phi: rng.random_range(-0.5..0.5),
        own_noise_std: rng.random_range(0.3..2.0),
        seed,
    };
    let series = spec.generate(t, d).expect("valid spec");
    let ids: Vec<AgentId> = series.iter().map(|s| s.agent_id.clone()).collect();
    let central = ids[rng.random_range(0..n)].clone();
    let support: Vec<AgentId> = ids.iter().filter(|a| **a != central).cloned().collect();
    let mut reservations = ReservationSchedule::new();
    for a in &support {
        for lag in 1..=d {
            reservations.set(a.clone(), lag, rng.random_range(0.0..=u_max)).unwrap();
        }
    }
    let config = MarketConfig::new(central, support, LagSpec::new(d, t).unwrap(), SolverSettings::default()).unwrap();
    RandomScenario {
        config,
        series,
        reservations,
    }
}
