//! Cell scheduling and the persisted run record.
//!
//! A cell is one (method, N_O, t) point over one or more constraint variants.
//! Cells run on a rayon pool; a failing cell is recorded and the run goes on.

use std::time::Instant;

use anyhow::{anyhow, Result};
use log::{info, warn};
use qmetro::channels::{ChannelFamily, ThermalChannelParams};
use qmetro::methods::{
    default_estimators, method1_variant, method2_variant, method3, no_entanglement_bounds, Protocol, SeesawConfig,
    Variant,
};
use qmetro::problem::{cartesian_product, make_grid, Direction, EstimationProblem, HypothesisGrid, Prior, RewardKind};
use qmetro::realization::{extract_realization, RealizationDiagnostics};
use qmetro::sdp::{InteriorPointSolver, SolverStatus, TesterDiagnostics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Case, ExperimentConfig, MethodKind, PriorConfig};

/// Version tag of the result file layout.
pub const SCHEMA: &str = "qmetro-run/1";

/// Eigenvalues above this count towards a POVM element's rank.
pub const RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub estimators: Vec<Vec<f64>>,
    /// Input marginal of the tester.
    pub sigma: ComplexMatrixRecord,
    /// Largest squared Schmidt coefficient of the realized probe.
    pub schmidt_p0: Option<f64>,
    pub povm_ranks: Vec<usize>,
    /// Prior-averaged probability of each outcome.
    pub outcome_probabilities: Vec<f64>,
    pub seesaw_iterations: usize,
    pub restarts: usize,
    pub solver_status: SolverStatus,
    /// Largest tester constraint violation.
    pub tester_violation: f64,
    /// Largest realization reconstruction/completeness deviation.
    pub realization_deviation: Option<f64>,
    pub realization_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: MethodKind,
    pub variant: Variant,
    pub n_o: usize,
    pub t: Option<f64>,
    pub reward: RewardKind,
    pub direction: Direction,
    /// Expected reward or cost on the full hypothesis grid.
    pub score: Option<f64>,
    /// The method's own objective. Differs from `score` only for m1, which
    /// is optimized on an `n_o`-point grid.
    pub native_score: Option<f64>,
    pub protocol: Option<ProtocolSummary>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema: String,
    pub qmetro_version: String,
    pub config: ExperimentConfig,
    /// Solver tolerance actually used (config or environment override).
    pub solver_tol: f64,
    pub cells: Vec<CellResult>,
    pub wall_time_s: f64,
}

impl RunResult {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: MethodKind,
    n_o: usize,
    t: Option<f64>,
    variants: &'static [Variant],
}

fn family(config: &ExperimentConfig, t: Option<f64>) -> ChannelFamily {
    match config.case {
        Case::Phase => ChannelFamily::Phase { dim: config.phase.as_ref().map_or(3, |p| p.dim) },
        Case::Su2 => ChannelFamily::Su2,
        Case::Thermometry => {
            let th = config.thermometry.clone().unwrap_or_default();
            let mut params =
                ThermalChannelParams::new(th.epsilon, th.coupling, th.statistics, t.expect("thermometry time"));
            params.keep_hamiltonian_phase = th.keep_hamiltonian_phase;
            ChannelFamily::Thermal(params)
        }
    }
}

/// Problem on `per_axis` hypotheses per axis.
pub fn build_problem(config: &ExperimentConfig, t: Option<f64>, per_axis: usize) -> Result<EstimationProblem> {
    let (lo, hi) = config.bounds();
    let axis = make_grid(lo, hi, per_axis, config.grid)?;
    let grid = HypothesisGrid::new(cartesian_product(&vec![axis; config.n_axes()]))?;
    let prior = match config.prior {
        PriorConfig::Uniform => Prior::uniform(&grid),
        PriorConfig::Gaussian { mu, sigma } => Prior::gaussian(&grid, mu, sigma)?,
    };
    Ok(EstimationProblem::from_family(&family(config, t), grid, prior, config.reward_kind())?)
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    const GENERAL: &[Variant] = &[Variant::General];
    const PPT: &[Variant] = &[Variant::Ppt];
    const BOUNDS: &[Variant] = &[Variant::General, Variant::Ppt, Variant::Product];
    let mut out = Vec::new();
    for t in config.times() {
        for &method in &config.methods {
            for &n_o in &config.n_o {
                let mut push = |variants| out.push(Cell { method, n_o, t, variants });
                if method == MethodKind::M3 && config.variants.contains(&Variant::Product) {
                    // one bounds computation keeps the three variants ordered
                    push(BOUNDS);
                    continue;
                }
                if config.variants.contains(&Variant::General) {
                    push(GENERAL);
                }
                if config.variants.contains(&Variant::Ppt) {
                    push(PPT);
                }
            }
        }
    }
    out
}

fn matrix_record(m: &qmetro::linalg::ComplexMatrix) -> ComplexMatrixRecord {
    let rows =
        |f: &dyn Fn(usize, usize) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(i, j)).collect()).collect();
    ComplexMatrixRecord { re: rows(&|i, j| m[(i, j)].re), im: rows(&|i, j| m[(i, j)].im) }
}

fn summarize(problem: &EstimationProblem, p: &Protocol) -> ProtocolSummary {
    let tester = &p.tester;
    let (schmidt_p0, povm_ranks, realization_deviation, realization_error) = match extract_realization(tester) {
        Ok(real) => {
            let ranks = real.povm.iter().map(|m| m.rank(RANK_TOL)).collect();
            let dev = RealizationDiagnostics::of(&real, tester).map(|d| d.worst()).ok();
            (Some(real.schmidt_p0), ranks, dev, None)
        }
        Err(e) => (None, Vec::new(), None, Some(e.to_string())),
    };
    ProtocolSummary {
        estimators: p.estimators.clone(),
        sigma: matrix_record(tester.sigma().matrix()),
        schmidt_p0,
        povm_ranks,
        outcome_probabilities: tester
            .elements()
            .iter()
            .map(|t| problem.chois().iter().zip(problem.prior().weights()).map(|(c, w)| w * c.matrix().inner(t)).sum())
            .collect(),
        seesaw_iterations: p.iterations,
        restarts: p.restarts,
        solver_status: p.status,
        tester_violation: TesterDiagnostics::of(tester).worst(),
        realization_deviation,
        realization_error,
    }
}

fn solve_cell(
    config: &ExperimentConfig,
    cell: &Cell,
    full: &EstimationProblem,
    seesaw: &SeesawConfig,
    solver: &InteriorPointSolver,
) -> Result<Vec<(Protocol, f64)>> {
    let per_axis = config.per_axis(cell.n_o).ok_or_else(|| anyhow!("n_o = {} has no product grid", cell.n_o))?;
    let (lo, hi) = config.bounds();
    let estimators = || default_estimators(lo, hi, per_axis, config.n_axes());
    if cell.method == MethodKind::M1 {
        // solved on the coarse grid, scored on the full one
        let coarse = build_problem(config, cell.t, per_axis)?;
        let mut p = method1_variant(&coarse, cell.variants[0], solver)?;
        let native = p.score;
        p.score = full.reward_kind().sign() * p.tester.score(&full.assemble_x(&p.estimators)?)?;
        return Ok(vec![(p, native)]);
    }
    let protocols = match cell.method {
        MethodKind::M3 if cell.variants.len() == 1 => {
            let start = method2_variant(full, estimators()?, cell.variants[0], solver)?;
            vec![method3(full, &start, seesaw, solver)?]
        }
        MethodKind::M3 => {
            let b = no_entanglement_bounds(full, estimators()?, seesaw, solver)?;
            vec![b.general, b.outer, b.inner]
        }
        _ => vec![method2_variant(full, estimators()?, cell.variants[0], solver)?],
    };
    Ok(protocols
        .into_iter()
        .map(|p| {
            let native = p.score;
            (p, native)
        })
        .collect())
}

/// Runs every cell of `config` with solver tolerance `solver_tol` on the
/// current rayon pool.
pub fn run(config: &ExperimentConfig, solver_tol: f64) -> Result<RunResult> {
    config.validate()?;
    let config = config.resolved();
    let started = Instant::now();
    let solver = InteriorPointSolver::with_tol(solver_tol);
    let kind = config.reward_kind();
    let seesaw = SeesawConfig {
        score_gap_tol: config.tolerances.seesaw,
        max_iters: config.tolerances.seesaw_max_iters,
        seed: config.seed,
        split_restarts: config.tolerances.split_restarts,
        ..SeesawConfig::for_reward(kind)
    };
    let n_h = config.hypotheses();
    let times = config.times();
    let problems: Vec<(Option<f64>, Result<EstimationProblem, String>)> =
        times.par_iter().map(|&t| (t, build_problem(&config, t, n_h).map_err(|e| format!("{e:#}")))).collect();

    let cells = cells(&config);
    info!("{} cells, {} hypotheses per axis", cells.len(), n_h);
    let results: Vec<Vec<CellResult>> = cells
        .par_iter()
        .map(|cell| {
            let t0 = Instant::now();
            let full = &problems.iter().find(|(t, _)| *t == cell.t).expect("problem per time").1;
            let outcome = match full {
                Ok(full) => solve_cell(&config, cell, full, &seesaw, &solver),
                Err(e) => Err(anyhow!("problem construction: {e}")),
            };
            let wall_time_s = t0.elapsed().as_secs_f64();
            let base = |variant| CellResult {
                method: cell.method,
                variant,
                n_o: cell.n_o,
                t: cell.t,
                reward: kind,
                direction: kind.direction(),
                score: None,
                native_score: None,
                protocol: None,
                error: None,
                wall_time_s,
            };
            match outcome {
                Ok(protocols) => {
                    let out: Vec<CellResult> = cell
                        .variants
                        .iter()
                        .zip(protocols)
                        .filter(|(v, _)| config.variants.contains(v))
                        .map(|(&v, (p, native))| CellResult {
                            score: Some(p.score),
                            native_score: Some(native),
                            protocol: Some(summarize(full.as_ref().expect("solved"), &p)),
                            ..base(v)
                        })
                        .collect();
                    info!("{:?} N_O={} t={:?}: done in {:.1}s", cell.method, cell.n_o, cell.t, wall_time_s);
                    out
                }
                Err(e) => {
                    let msg = format!("{e:#}");
                    warn!("{:?} N_O={} t={:?} failed: {msg}", cell.method, cell.n_o, cell.t);
                    cell.variants
                        .iter()
                        .filter(|v| config.variants.contains(v))
                        .map(|&v| CellResult { error: Some(msg.clone()), ..base(v) })
                        .collect()
                }
            }
        })
        .collect();

    Ok(RunResult {
        schema: SCHEMA.into(),
        qmetro_version: env!("CARGO_PKG_VERSION").into(),
        config,
        solver_tol,
        cells: results.into_iter().flatten().collect(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
