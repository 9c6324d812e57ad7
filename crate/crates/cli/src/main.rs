//! `gridlab`: run reserve/backlog experiments from JSON configs and write
//! plot-ready CSV/JSON files plus a `manifest.json` per run.
//!
//! Exit codes: 0 success, 2 config error, 3 infeasible or diverged, 4 internal.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridlab_core::thermal::ThermalMode;
use thiserror::Error;

use crate::config::{load, DriftFile, RegionsFile, SimulateFile, SweepFile, ThermalFile};
use crate::output::OutDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "gridlab", version, about = "Reserve and backlog experiments for a grid with deferrable demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, short)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "GRIDLAB_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct Seeded {
    #[command(flatten)]
    common: Common,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ConstantCop,
    HeatPump,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory: trajectory.csv, stats.json.
    Simulate(Seeded),
    /// Exact, closed-form and Monte Carlo drift at given or sampled states: drift.csv.
    Drift(Seeded),
    /// Stability verdicts over a parameter grid: verdicts.csv, geometry.json.
    Sweep(Seeded),
    /// Evaporation ledger of a delayed-heating scenario: ledger.json.
    Thermal {
        /// Scenario file with `building` and `scenario` sections.
        #[arg(long, alias = "config", short = 's')]
        scenario: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "constant-cop")]
        mode: Mode,
    },
    /// Region edges and negative-drift sets on a grid: geometry.json, regions.csv.
    Regions(Common),
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = load::<SimulateFile>(&a.common.config)?.resolve(a.seed);
            cfg.sim_config().validate()?;
            let mut out = OutDir::create(&a.common.out)?;
            commands::simulate_cmd(&cfg, &mut out)?;
            out.finish("simulate", &cfg)
        }
        Command::Drift(a) => {
            let cfg = load::<DriftFile>(&a.common.config)?.resolve(a.seed);
            let reports = pool(a.common.threads)?.install(|| commands::drift_cmd(&cfg))?;
            let mut out = OutDir::create(&a.common.out)?;
            commands::write_drift(&reports, &mut out)?;
            out.finish("drift", &cfg)
        }
        Command::Sweep(a) => {
            let cfg = load::<SweepFile>(&a.common.config)?.resolve(a.seed);
            let rows = pool(a.common.threads)?.install(|| commands::sweep_cmd(&cfg))?;
            let mut out = OutDir::create(&a.common.out)?;
            commands::write_sweep(&cfg, &rows, &mut out)?;
            out.finish("sweep", &cfg)
        }
        Command::Thermal { scenario, out, mode } => {
            let cfg = load::<ThermalFile>(&scenario)?;
            let mode = match mode {
                Mode::ConstantCop => ThermalMode::ConstantCop,
                Mode::HeatPump => ThermalMode::HeatPump,
            };
            let mut dir = OutDir::create(&out)?;
            commands::thermal_cmd(&cfg, mode, &mut dir)?;
            dir.finish("thermal", &cfg)
        }
        Command::Regions(a) => {
            let cfg = load::<RegionsFile>(&a.config)?;
            let mut out = OutDir::create(&a.out)?;
            commands::regions_cmd(&cfg, &mut out)?;
            out.finish("regions", &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gridlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
