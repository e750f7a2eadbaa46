//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{kkt_violation, normal_equations, objective, prox_gradient, random_scenario};
use lasso_market::config::{ScenarioConfig, DEFAULT_U_GRID};
use lasso_market::experiment::{run_method_comparison, run_t_sweep, run_u_sweep};
use lasso_market::market::{verify_viability, MarketOutcome};
use lasso_market::regression::{
    ols_fit, weighted_lasso_fit, Column, DesignMatrix, PenaltyVector, SolverSettings,
};
use lasso_market::AgentId;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn kkt_of(o: &MarketOutcome) -> f64 {
    kkt_violation(o.market_design.values(), &o.target, o.penalties.as_slice(), o.market_beta.as_slice())
}

/// Criterion 1: buyer viability over 100 random markets.
fn viability(kkt_sink: &mut Vec<f64>) -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut failures = 0;
    let runs = 100;
    for k in 0..runs {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=4);
        let t = rng.random_range(50..=500);
        let sc = random_scenario(1000 + k, n, d, t, 1.0);
        match sc.clear() {
            Ok(o) => {
                // Recompute both sides here from raw matrices.
                let mse = |x: &DMatrix<f64>, b: &[f64]| objective(x, &o.target, &vec![0.0; b.len()], b);
                let lhs = mse(o.market_design.values(), o.market_beta.as_slice())
                    + o.payments.iter().map(|p| p.amount).sum::<f64>();
                let rhs = mse(o.baseline_design.values(), o.baseline_beta.as_slice());
                worst_gap = worst_gap.max(lhs - rhs);
                if lhs > rhs + 1e-6 || !verify_viability(&o).holds || o.buyer_net_gain < -1e-6 {
                    failures += 1;
                }
                kkt_sink.push(kkt_of(&o));
            }
            Err(e) => {
                eprintln!("scenario {k} (N={n}, D={d}, T={t}) failed: {e}");
                failures += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        failures == 0 && secs < 60.0,
        format!("{runs} scenarios, {failures} violations, worst lhs-rhs {worst_gap:.3e}, {secs:.2}s"),
    )
}

/// Criterion 2: KKT at 10x tolerance and agreement with a proximal-gradient oracle.
fn solver_correctness(kkt_sink: &[f64]) -> Verdict {
    let tol = SolverSettings::default().tolerance;
    let mut kkts: Vec<f64> = kkt_sink.to_vec();
    let mut worst_obj: f64 = 0.0;
    let mut small = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // Small markets: at most 4 lag features.
    for k in 0..60 {
        let (n, d) = [(2, 1), (2, 2), (3, 1), (4, 1), (2, 4), (3, 2)][k % 6];
        let t = rng.random_range(8..=30);
        let sc = random_scenario(5000 + k as u64, n, d, t, rng.random_range(0.0..2.0));
        let o = sc.clear().expect("small market clears");
        kkts.push(kkt_of(&o));
        let x = o.market_design.values();
        let ours = objective(x, &o.target, o.penalties.as_slice(), o.market_beta.as_slice());
        let (_, oracle) = prox_gradient(x, &o.target, o.penalties.as_slice(), 2_000_000);
        worst_obj = worst_obj.max((ours - oracle).abs());
        small += 1;
    }
    // Plain Gaussian designs with an intercept and up to 4 penalized columns.
    for _ in 0..60 {
        let t = rng.random_range(5..=30);
        let p = rng.random_range(1..=4);
        let mut x = DMatrix::from_fn(t, p + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.column_mut(0).fill(1.0);
        let y: Vec<f64> = (0..t).map(|i| x[(i, 1)] * 0.7 + rng.sample::<f64, _>(StandardNormal)).collect();
        let mut lambda = vec![0.0];
        lambda.extend((0..p).map(|_| rng.random_range(0.0..(t as f64))));
        let mut cols = vec![Column::Intercept];
        cols.extend((1..=p).map(|l| Column::lag("Z", l)));
        let dm = DesignMatrix::new(x.clone(), cols).unwrap();
        let beta = weighted_lasso_fit(&dm, &y, &PenaltyVector::new(lambda.clone()).unwrap(), &SolverSettings::default())
            .expect("converges");
        kkts.push(kkt_violation(&x, &y, &lambda, beta.as_slice()));
        let ours = objective(&x, &y, &lambda, beta.as_slice());
        let (_, oracle) = prox_gradient(&x, &y, &lambda, 2_000_000);
        worst_obj = worst_obj.max((ours - oracle).abs());
        small += 1;
    }
    let worst_kkt = kkts.iter().cloned().fold(0.0, f64::max);
    verdict(
        worst_kkt <= 10.0 * tol && worst_obj <= 1e-8,
        format!(
            "{} KKT checks, worst {worst_kkt:.2e} (limit {:.0e}); {small} oracle comparisons, worst objective gap {worst_obj:.2e}",
            kkts.len(),
            10.0 * tol
        ),
    )
}

/// Criterion 3: zero penalties reproduce OLS.
fn zero_penalty() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = rng.random_range(40..=200);
        let p = rng.random_range(2..=8);
        let mut x = DMatrix::from_fn(t, p + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.column_mut(0).fill(1.0);
        let y: Vec<f64> = (0..t)
            .map(|i| (1..=p).map(|j| x[(i, j)] * (j as f64 * 0.3 - 1.0)).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut cols = vec![Column::Intercept];
        cols.extend((1..=p).map(|l| Column::lag("Z", l)));
        let dm = DesignMatrix::new(x.clone(), cols).unwrap();
        let lasso = weighted_lasso_fit(&dm, &y, &PenaltyVector::zeros(p + 1), &SolverSettings::default()).unwrap();
        let ols = ols_fit(&dm, &y).unwrap();
        let oracle = normal_equations(&x, &y);
        for j in 0..=p {
            worst = worst.max((lasso.get(j) - ols.get(j)).abs());
            worst = worst.max((lasso.get(j) - oracle[j]).abs());
        }
    }
    verdict(worst <= 1e-6, format!("20 instances, worst coefficient gap {worst:.2e}"))
}

/// Criterion 4: payment = |u·β| exactly and zero payment iff zero coefficient.
fn payment_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut records = 0;
    let mut inexact = 0;
    let mut coupling = 0;
    let mut free_features = 0;
    for k in 0..100 {
        let mut sc = random_scenario(9000 + k, rng.random_range(2..=6), rng.random_range(1..=4), rng.random_range(50..=300), 1.0);
        // Give the first seller free data so the u = 0 branch is exercised.
        let free = sc.config.support_agents[0].clone();
        sc.reservations.set_agent(&free, sc.config.lag_spec.max_lag, 0.0).unwrap();
        let o = sc.clear().unwrap();
        for p in &o.payments {
            records += 1;
            let u = sc.reservations.get(&p.agent_id, p.lag);
            let beta = o.coefficient(&p.agent_id, p.lag).unwrap();
            if p.amount != (u * beta).abs() || p.reservation != u || p.coefficient != beta {
                inexact += 1;
            }
            if u > 0.0 {
                if (p.amount == 0.0) != (beta == 0.0) {
                    coupling += 1;
                }
            } else {
                free_features += 1;
                if p.amount != 0.0 {
                    coupling += 1;
                }
            }
        }
    }
    verdict(
        inexact == 0 && coupling == 0,
        format!("{records} payment records, {inexact} inexact, {coupling} zero-coupling breaks ({free_features} had u = 0)"),
    )
}

fn synthetic_config(seed: u64, central: &str) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::synthetic_default();
    cfg.seed = Some(seed);
    cfg.central_agent = Some(central.to_string());
    cfg
}

/// Criterion 5: recovery of the generating structure over 50 seeds.
fn recovery() -> Verdict {
    let seeds = 50;
    let mut p1_ok = 0;
    let mut p2_ok = 0;
    let mut spurious_ols = 0usize;
    let mut spurious_lasso = 0usize;
    for seed in 0..seeds {
        let r = run_method_comparison(&synthetic_config(seed, "P1").resolve().unwrap()).unwrap();
        let mut ok = true;
        for row in &r.coefficients {
            let (Some(agent), Some(lag)) = (&row.agent, row.lag) else { continue };
            if agent.as_str() == "P1" {
                continue;
            }
            if lag == 1 {
                ok &= row.lasso_all != 0.0;
            } else {
                ok &= row.lasso_all.abs() < 0.02;
                spurious_ols += usize::from(row.ols_all.abs() > 0.02);
                spurious_lasso += usize::from(row.lasso_all.abs() > 0.02);
            }
        }
        p1_ok += usize::from(ok);

        let r = run_method_comparison(&synthetic_config(seed, "P2").resolve().unwrap()).unwrap();
        let all_zero = r
            .coefficients
            .iter()
            .filter(|row| row.agent.as_ref().is_some_and(|a| a.as_str() != "P2"))
            .all(|row| row.lasso_all == 0.0);
        p2_ok += usize::from(all_zero);
    }
    let need = 45;
    let mean_ols = spurious_ols as f64 / seeds as f64;
    let mean_lasso = spurious_lasso as f64 / seeds as f64;
    verdict(
        p1_ok >= need && p2_ok >= need && mean_ols > mean_lasso,
        format!(
            "P1 central: {p1_ok}/{seeds} seeds with lag-1 cross kept and lag-2/3 cross < 0.02; \
             spurious |b|>0.02 per seed OLS-all {mean_ols:.2} vs lasso {mean_lasso:.2}; \
             P2 central: {p2_ok}/{seeds} seeds with all support coefficients zero"
        ),
    )
}

/// Criterion 6: shape of the payment curve over u.
fn u_sweep_shape() -> Verdict {
    let sc = ScenarioConfig::synthetic_default().resolve().unwrap();
    let report = run_u_sweep(&sc, &DEFAULT_U_GRID, true).unwrap();
    let first = &report.sweep[0].1;
    let last = &report.sweep.last().unwrap().1;
    let sellers: Vec<AgentId> = sc.market.support_agents.clone();
    let zero_start = sellers.iter().all(|a| first.agent_payment(a) == 0.0);
    let zero_end = sellers.iter().all(|a| last.agent_payment(a) == 0.0);
    let nonneg = report.sweep.iter().all(|(_, o)| o.payments.iter().all(|p| p.amount >= 0.0));
    let interior = &report.sweep[1..report.sweep.len() - 1];
    let peaks: Vec<String> = sellers
        .iter()
        .map(|a| {
            let best = interior
                .iter()
                .map(|(pt, o)| (o.agent_payment(a), pt.value.clone()))
                .fold((0.0, String::new()), |acc, v| if v.0 > acc.0 { v } else { acc });
            format!("{a} peak {:.4} at u={}", best.0, best.1)
        })
        .collect();
    let all_positive = sellers
        .iter()
        .all(|a| interior.iter().any(|(_, o)| o.agent_payment(a) > 0.0));
    verdict(
        zero_start && zero_end && nonneg && all_positive,
        format!(
            "payment(0)=0: {zero_start}, payment(u={})=0: {zero_end}, non-negative: {nonneg}; {}",
            DEFAULT_U_GRID[DEFAULT_U_GRID.len() - 1],
            peaks.join(", ")
        ),
    )
}

/// Criterion 7: per-step payments decay with the window.
fn t_sweep_decay() -> Verdict {
    let mut cfg = ScenarioConfig::synthetic_default();
    cfg.sweep.t_grid = Some(vec![240, 2000]);
    let sc = cfg.resolve().unwrap();
    let report = run_t_sweep(&sc, &[240, 2000]).unwrap();
    let (short, long) = (&report.sweep[0].1, &report.sweep[1].1);
    let total = |o: &MarketOutcome| o.total_payment() / o.window_length() as f64;
    let mut ok = total(long) < 0.25 * total(short);
    let mut parts = vec![format!("total {:.3}", total(long) / total(short))];
    for a in &sc.market.support_agents {
        let (s, l) = (short.agent_payment_per_step(a), long.agent_payment_per_step(a));
        if s > 0.0 {
            ok &= l < 0.25 * s;
            parts.push(format!("{a} {:.3}", l / s));
        }
    }
    verdict(ok, format!("per-step payment ratio T=2000 / T=240: {}", parts.join(", ")))
}

/// Criterion 8: two CLI runs write byte-identical tables.
fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_lasso-market");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let commands: [&[&str]; 6] = [
        &["simulate"],
        &["clear"],
        &["compare-methods"],
        &["sweep-u"],
        &["sweep-t"],
        &["grid-2", "--grid-a", "0,0.2,0.6", "--grid-b", "0,0.2,0.6"],
    ];
    for dir in &dirs {
        for args in commands {
            let status = Command::new(bin)
                .args(args)
                .args(["--seed", "7", "--out"])
                .arg(dir.path())
                .stdout(std::process::Stdio::null())
                .status()
                .expect("binary runs");
            if !status.success() {
                return verdict(false, format!("{args:?} exited with {status}"));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).ok();
        if Some(a) != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    verdict(
        differing.is_empty() && names.len() >= 12,
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

fn main() -> ExitCode {
    let mut kkt = Vec::new();
    let results = [
        ("1 buyer viability", viability(&mut kkt)),
        ("2 solver correctness", solver_correctness(&kkt)),
        ("3 zero-penalty equals OLS", zero_penalty()),
        ("4 payment identity", payment_identity()),
        ("5 synthetic recovery", recovery()),
        ("6 u-sweep shape", u_sweep_shape()),
        ("7 T-sweep decay", t_sweep_decay()),
        ("8 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
