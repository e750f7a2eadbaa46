use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lasso_market::config::{Scenario, ScenarioConfig, DEFAULT_OTHERS_U};
use lasso_market::data_io::{ingest_csv, write_dataset_csv, write_series_csv, CsvSchema, Normalization};
use lasso_market::experiment::{
    run_method_comparison, run_t_sweep, run_two_agent_grid, run_u_sweep, ExperimentReport,
};
use lasso_market::{AgentId, Error};

/// Regression market experiments on synthetic or zonal wind data.
///
/// Without --config the synthetic scenario is used: P1 buys lag features of
/// P2..P5, max lag 3, window 240, uniform reservation 0.6.
#[derive(Debug, Parser)]
#[command(name = "lasso-market", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Scenario TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's output_dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    max_lag: Option<usize>,
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Coordinate-descent convergence tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the scenario's series to series.csv.
    Simulate,
    /// Clear one market and write clear.csv.
    Clear,
    /// OLS on own lags vs OLS on all features vs weighted lasso.
    CompareMethods,
    /// Sweep a uniform reservation over all sellers.
    SweepU {
        /// Comma-separated u values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Scale the scenario's reservation schedule instead of setting u uniformly.
        #[arg(long)]
        scale: bool,
    },
    /// Sweep the training window length.
    SweepT {
        /// Comma-separated window lengths.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
    /// Vary two sellers' reservations on a grid.
    #[command(name = "grid-2")]
    Grid2 {
        #[arg(long)]
        agent_a: Option<String>,
        #[arg(long)]
        agent_b: Option<String>,
        #[arg(long, value_delimiter = ',')]
        grid_a: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid_b: Option<Vec<f64>>,
        /// Reservation of every other seller.
        #[arg(long)]
        others_u: Option<f64>,
    },
    /// Read a zonal CSV and write the cleaned dataset.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "timestamp")]
        timestamp_column: String,
        /// Comma-separated zone columns (default: DK1..SE4).
        #[arg(long, value_delimiter = ',')]
        zones: Option<Vec<String>>,
        #[arg(long)]
        normalize: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::ViabilityViolation { .. } => 4,
        _ => 2,
    }
}

fn load_config(g: &GlobalOpts) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::synthetic_default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = Some(s);
    }
    if let Some(d) = g.max_lag {
        cfg.max_lag = d;
    }
    if let Some(t) = g.window {
        cfg.window = t;
    }
    if let Some(tol) = g.tolerance {
        cfg.solver.tolerance = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(g: &GlobalOpts, cfg: &ScenarioConfig) -> PathBuf {
    g.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn report_written(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<(), Error> {
    for p in report.write_tables(dir, stem)? {
        println!("wrote {}", p.display());
    }
    let s = &report.summary;
    println!(
        "{}: {} clearing(s), viability rate {}, mean buyer gain {:.6} ({:.3e} per step)",
        report.scenario_id, s.clearings, s.viability_rate, s.mean_buyer_gain, s.mean_buyer_gain_per_step
    );
    if let Some(m) = s.cross_monotonicity {
        println!(
            "cross monotonicity: {}/{} neighbouring cells non-increasing ({:.1}%)",
            m.non_increasing,
            m.comparisons,
            100.0 * m.rate()
        );
    }
    Ok(())
}

fn pick_agent(arg: &Option<String>, cfg: &Option<String>, scenario: &Scenario, k: usize) -> Result<AgentId, Error> {
    match arg.as_ref().or(cfg.as_ref()) {
        Some(a) => Ok(AgentId::new(a.as_str())),
        None => scenario
            .market
            .support_agents
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Config("grid-2 needs two support agents".into())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let g = &cli.global;
    if let Command::Ingest {
        input,
        timestamp_column,
        zones,
        normalize,
    } = &cli.command
    {
        let schema = match zones {
            Some(z) => CsvSchema::identity(timestamp_column, &z.iter().map(String::as_str).collect::<Vec<_>>()),
            None => CsvSchema {
                timestamp_column: timestamp_column.clone(),
                ..CsvSchema::nordic()
            },
        };
        let norm = if *normalize { Normalization::PerZoneMax } else { Normalization::None };
        let report = ingest_csv(input, &schema, norm)?;
        let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        ensure_dir(&dir)?;
        let path = dir.join("dataset.csv");
        write_dataset_csv(&report.dataset, &path)?;
        println!(
            "read {} rows, dropped {}, kept {} hours in {} contiguous run(s); wrote {}",
            report.total_rows,
            report.dropped_rows,
            report.dataset.len(),
            report.dataset.contiguous_runs().len(),
            path.display()
        );
        if let Some(w) = &report.warning {
            eprintln!("warning: {w}");
        }
        return Ok(());
    }

    let cfg = load_config(g)?;
    let dir = out_dir(g, &cfg);
    match &cli.command {
        Command::Ingest { .. } => unreachable!("handled above"),
        Command::Simulate => {
            let scenario = cfg.resolve()?;
            ensure_dir(&dir)?;
            let path = dir.join("series.csv");
            write_series_csv(&scenario.series, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Clear => {
            let scenario = cfg.resolve()?;
            let report = run_u_sweep(&scenario, &[1.0], false)?;
            report_written(&report, &dir, "clear")?;
            let o = &report.sweep[0].1;
            println!(
                "baseline mse {:.6}, market mse {:.6}, total payment {:.6}, buyer net gain {:.6}",
                o.baseline_loss.mse,
                o.market_loss.mse,
                o.total_payment(),
                o.buyer_net_gain
            );
        }
        Command::CompareMethods => {
            let report = run_method_comparison(&cfg.resolve()?)?;
            report_written(&report, &dir, "compare_methods")?;
        }
        Command::SweepU { grid, scale } => {
            let u_grid = grid.clone().unwrap_or_else(|| cfg.u_grid());
            let report = run_u_sweep(&cfg.resolve()?, &u_grid, !scale)?;
            report_written(&report, &dir, "u_sweep")?;
        }
        Command::SweepT { grid } => {
            let mut cfg = cfg.clone();
            if let Some(t) = grid {
                cfg.sweep.t_grid = Some(t.clone());
            } else if cfg.sweep.t_grid.is_none() {
                cfg.sweep.t_grid = Some(cfg.t_grid());
            }
            cfg.validate()?;
            let t_grid = cfg.t_grid();
            let report = run_t_sweep(&cfg.resolve()?, &t_grid)?;
            report_written(&report, &dir, "t_sweep")?;
        }
        Command::Grid2 {
            agent_a,
            agent_b,
            grid_a,
            grid_b,
            others_u,
        } => {
            let scenario = cfg.resolve()?;
            let a = pick_agent(agent_a, &cfg.sweep.agent_a, &scenario, 0)?;
            let b = pick_agent(agent_b, &cfg.sweep.agent_b, &scenario, 1)?;
            let ga = grid_a.clone().or_else(|| cfg.sweep.u_grid_a.clone()).unwrap_or_else(|| cfg.u_grid());
            let gb = grid_b.clone().or_else(|| cfg.sweep.u_grid_b.clone()).unwrap_or_else(|| cfg.u_grid());
            let others = others_u.or(cfg.sweep.others_u).unwrap_or(DEFAULT_OTHERS_U);
            let report = run_two_agent_grid(&scenario, &a, &b, &ga, &gb, others)?;
            report_written(&report, &dir, "grid2")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
