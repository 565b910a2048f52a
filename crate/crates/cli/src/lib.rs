//! Configuration-driven experiment runner for `qmetro`.

pub mod config;
pub mod runner;
pub mod tables;

use std::path::Path;

use anyhow::{Context, Result};

pub use config::ExperimentConfig;
pub use runner::{run, RunResult};
pub use tables::{emit_plot_data, PlotTables};

/// Environment variable overriding the configured solver tolerance.
pub const SOLVER_TOL_ENV: &str = "QMETRO_SOLVER_TOL";

pub const RESULT_FILE: &str = "result.json";

/// Writes `result.json` and the plot tables into `dir`.
pub fn persist(result: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(RESULT_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(result)?)
        .with_context(|| format!("writing {}", path.display()))?;
    emit_plot_data(result).write(dir)
}
