use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qmetro_cli::config::{Case, SU2_PAPER_N_H};
use qmetro_cli::{persist, run, ExperimentConfig, SOLVER_TOL_ENV};

#[derive(Parser)]
#[command(name = "qmetro", version, about = "Optimal single-shot Bayesian estimation protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Directory for result.json and the CSV tables.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// SU(2): 10 hypotheses per axis instead of the config value.
        #[arg(long)]
        paper_scale: bool,
    },
}

fn solver_tol(config: &ExperimentConfig) -> Result<f64> {
    match std::env::var(SOLVER_TOL_ENV) {
        Ok(v) => {
            let tol: f64 = v.parse().with_context(|| format!("{SOLVER_TOL_ENV}={v} is not a number"))?;
            anyhow::ensure!(tol.is_finite() && tol > 0.0, "{SOLVER_TOL_ENV} must be positive, got {tol}");
            Ok(tol)
        }
        Err(_) => Ok(config.tolerances.solver),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<usize> {
    let Command::Run { config, out, threads, seed, paper_scale } = cli.command;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if paper_scale && cfg.case == Case::Su2 {
        cfg.n_h = Some(SU2_PAPER_N_H);
    }
    let tol = solver_tol(&cfg)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let result = pool.build()?.install(|| run(&cfg, tol))?;
    persist(&result, &out)?;
    println!(
        "{} cells in {:.1}s, {} failed; results in {}",
        result.cells.len(),
        result.wall_time_s,
        result.failures(),
        out.display()
    );
    Ok(result.failures())
}
