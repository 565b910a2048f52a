//! Experiment configuration (TOML).
//!
//! Optional fields are filled by [`ExperimentConfig::resolved`], and the
//! resolved config is what a run echoes, so a result file alone suffices to
//! re-run it.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use qmetro::channels::Statistics;
use qmetro::methods::Variant;
use qmetro::problem::{GridScheme, RewardKind};
use serde::{Deserialize, Serialize};

/// Hypotheses per axis for SU(2) under `--paper-scale`.
pub const SU2_PAPER_N_H: usize = 10;
const SU2_DESK_N_H: usize = 6;
const DEFAULT_N_H: usize = 1000;
const DEFAULT_TIME_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Phase,
    Thermometry,
    Su2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    M1,
    M2,
    M3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    #[default]
    Uniform,
    Gaussian {
        mu: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub dim: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { dim: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometryConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Bath spectral density at `epsilon`.
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default = "default_statistics")]
    pub statistics: Statistics,
    /// Explicit probing times; when absent, `time_points` times `k/n`,
    /// `k = 1..=n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_points: Option<usize>,
    #[serde(default)]
    pub keep_hamiltonian_phase: bool,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_coupling() -> f64 {
    2.0
}

fn default_statistics() -> Statistics {
    Statistics::Bosonic
}

impl Default for ThermometryConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            coupling: default_coupling(),
            statistics: default_statistics(),
            times: None,
            time_points: None,
            keep_hamiltonian_phase: false,
        }
    }
}

impl ThermometryConfig {
    pub fn time_grid(&self) -> Vec<f64> {
        match &self.times {
            Some(t) => t.clone(),
            None => {
                let n = self.time_points.unwrap_or(DEFAULT_TIME_POINTS);
                (1..=n).map(|k| k as f64 / n as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Interior-point gap and infeasibility target; `QMETRO_SOLVER_TOL`
    /// overrides it.
    #[serde(default = "default_solver_tol")]
    pub solver: f64,
    #[serde(default = "default_seesaw_tol")]
    pub seesaw: f64,
    #[serde(default = "default_max_iters")]
    pub seesaw_max_iters: usize,
    #[serde(default = "default_true")]
    pub split_restarts: bool,
}

fn default_solver_tol() -> f64 {
    1e-9
}

fn default_seesaw_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    200
}

fn default_true() -> bool {
    true
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: default_solver_tol(),
            seesaw: default_seesaw_tol(),
            seesaw_max_iters: default_max_iters(),
            split_restarts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    #[serde(default)]
    pub prior: PriorConfig,
    /// Defaults: cos2 (phase), mse (thermometry), choi_fidelity (su2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// Hypotheses; per axis for su2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_h: Option<usize>,
    /// Outcome counts; perfect cubes for su2.
    pub n_o: Vec<usize>,
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub grid: GridScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermometry: Option<ThermometryConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::General]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid config")?;
        config.validate()?;
        Ok(config.resolved())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Copy with every case-dependent default made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let (lo, hi, reward) = match c.case {
            Case::Phase => (0.0, TAU, RewardKind::Cos2),
            Case::Thermometry => (0.1, 2.0, RewardKind::Mse),
            Case::Su2 => (-PI, PI, RewardKind::ChoiFidelity),
        };
        c.theta_min.get_or_insert(lo);
        c.theta_max.get_or_insert(hi);
        c.reward.get_or_insert(reward);
        c.n_h.get_or_insert(if c.case == Case::Su2 { SU2_DESK_N_H } else { DEFAULT_N_H });
        match c.case {
            Case::Phase => {
                c.phase.get_or_insert_with(PhaseConfig::default);
            }
            Case::Thermometry => {
                let th = c.thermometry.get_or_insert_with(ThermometryConfig::default);
                th.times = Some(th.time_grid());
                th.time_points = None;
            }
            Case::Su2 => {}
        }
        c
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.resolved().reward.expect("resolved")
    }

    pub fn bounds(&self) -> (f64, f64) {
        let r = self.resolved();
        (r.theta_min.expect("resolved"), r.theta_max.expect("resolved"))
    }

    pub fn hypotheses(&self) -> usize {
        self.resolved().n_h.expect("resolved")
    }

    /// Probing times, or `[None]` for the time-independent cases.
    pub fn times(&self) -> Vec<Option<f64>> {
        match self.case {
            Case::Thermometry => {
                self.resolved().thermometry.expect("resolved").time_grid().into_iter().map(Some).collect()
            }
            _ => vec![None],
        }
    }

    /// Number of parameter components.
    pub fn n_axes(&self) -> usize {
        if self.case == Case::Su2 {
            3
        } else {
            1
        }
    }

    /// Per-axis count for `n` outcomes (or hypotheses).
    pub fn per_axis(&self, n: usize) -> Option<usize> {
        if self.case != Case::Su2 {
            return Some(n);
        }
        let k = (n as f64).cbrt().round() as usize;
        (k * k * k == n).then_some(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !x.is_finite() => bail!("{name}: must be finite, got {x}"),
                _ => Ok(()),
            }
        };
        finite("theta_min", self.theta_min)?;
        finite("theta_max", self.theta_max)?;
        let r = self.resolved();
        let (lo, hi) = (r.theta_min.expect("resolved"), r.theta_max.expect("resolved"));
        ensure!(hi > lo, "theta_max: must exceed theta_min, got [{lo}, {hi})");
        ensure!(r.n_h.expect("resolved") >= 2, "n_h: need at least 2 hypotheses");

        let reward = r.reward.expect("resolved");
        let allowed: &[RewardKind] = match self.case {
            Case::Phase => &[RewardKind::Cos2],
            Case::Thermometry => &[RewardKind::Mse, RewardKind::Msle],
            Case::Su2 => &[RewardKind::ChoiFidelity],
        };
        ensure!(allowed.contains(&reward), "reward: {reward:?} is not available for case {:?}", self.case);

        match self.prior {
            PriorConfig::Uniform => {}
            PriorConfig::Gaussian { mu, sigma } => {
                ensure!(mu.is_finite(), "prior.mu: must be finite, got {mu}");
                ensure!(sigma.is_finite() && sigma > 0.0, "prior.sigma: must be positive and finite, got {sigma}");
                ensure!(self.case != Case::Su2, "prior: gaussian priors are single-parameter only");
            }
        }

        ensure!(!self.n_o.is_empty(), "n_o: empty list");
        for &n in &self.n_o {
            match self.per_axis(n) {
                Some(k) if k >= 2 => {}
                Some(_) => bail!("n_o: need at least 2 outcomes per axis, got {n}"),
                None => {
                    bail!("n_o: {n} is not a perfect cube, as su2 estimators form a product grid")
                }
            }
        }
        ensure!(!self.methods.is_empty(), "methods: empty list");
        ensure!(!self.variants.is_empty(), "variants: empty list");
        ensure!(
            !self.variants.contains(&Variant::Product) || self.methods.contains(&MethodKind::M3),
            "variants: product protocols are optimized by seesaw and need method m3"
        );

        ensure!(self.phase.is_none() || self.case == Case::Phase, "phase: section given for case {:?}", self.case);
        ensure!(
            self.thermometry.is_none() || self.case == Case::Thermometry,
            "thermometry: section given for case {:?}",
            self.case
        );
        if let Some(p) = &self.phase {
            ensure!(p.dim >= 2, "phase.dim: need at least 2, got {}", p.dim);
        }
        if self.case == Case::Thermometry {
            ensure!(lo > 0.0, "theta_min: temperatures must be positive, got {lo}");
            let th = r.thermometry.expect("resolved");
            ensure!(
                th.epsilon.is_finite() && th.epsilon > 0.0,
                "thermometry.epsilon: must be positive, got {}",
                th.epsilon
            );
            ensure!(
                th.coupling.is_finite() && th.coupling > 0.0,
                "thermometry.coupling: must be positive, got {}",
                th.coupling
            );
            ensure!(
                self.thermometry.as_ref().and_then(|t| t.time_points) != Some(0),
                "thermometry.time_points: must be positive"
            );
            let times = th.time_grid();
            ensure!(!times.is_empty(), "thermometry.times: empty list");
            for t in times {
                ensure!(t.is_finite() && t >= 0.0, "thermometry.times: must be finite and non-negative, got {t}");
            }
        }

        let tol = &self.tolerances;
        ensure!(tol.solver.is_finite() && tol.solver > 0.0, "tolerances.solver: must be positive, got {}", tol.solver);
        ensure!(tol.seesaw.is_finite() && tol.seesaw > 0.0, "tolerances.seesaw: must be positive, got {}", tol.seesaw);
        ensure!(tol.seesaw_max_iters > 0, "tolerances.seesaw_max_iters: must be positive");
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_case() {
        let c = ExperimentConfig::from_toml_str("case = \"su2\"\nn_o = [8, 27]\nmethods = [\"m3\"]\n").unwrap();
        assert_eq!(c.n_h, Some(6));
        assert_eq!(c.reward, Some(RewardKind::ChoiFidelity));
        assert_eq!(c.per_axis(27), Some(3));

        let c = ExperimentConfig::from_toml_str("case = \"thermometry\"\nn_o = [2]\nmethods = [\"m2\"]\n").unwrap();
        let times = c.thermometry.as_ref().unwrap().times.as_ref().unwrap();
        assert_eq!(times.len(), 100);
        assert_eq!(times[99], 1.0);
        assert_eq!(c.bounds(), (0.1, 2.0));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml_str(
            "case = \"phase\"\nn_o = [2, 3]\nmethods = [\"m1\", \"m3\"]\nvariants = [\"general\", \"ppt\"]\n\
             [prior]\nkind = \"gaussian\"\nmu = 3.0\nsigma = 1.0\n",
        )
        .unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn rejections_name_the_field() {
        let cases = [
            ("case = \"su2\"\nn_o = [9]\nmethods = [\"m2\"]\n", "n_o"),
            ("case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\nreward = \"mse\"\n", "reward"),
            ("case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\nvariants = [\"product\"]\n", "variants"),
            ("case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\n[thermometry]\nepsilon = 0.1\n", "thermometry"),
            ("case = \"thermometry\"\nn_o = [2]\nmethods = [\"m2\"]\ntheta_min = 0.0\n", "theta_min"),
            (
                "case = \"thermometry\"\nn_o = [2]\nmethods = [\"m2\"]\n[thermometry]\ntimes = [-1.0]\n",
                "thermometry.times",
            ),
            ("case = \"phase\"\nn_o = [2]\nmethods = [\"m2\"]\n[tolerances]\nsolver = 0.0\n", "tolerances.solver"),
        ];
        for (text, field) in cases {
            let err = format!("{:#}", ExperimentConfig::from_toml_str(text).unwrap_err());
            assert!(err.contains(field), "{err}");
        }
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = format!(
            "{:#}",
            ExperimentConfig::from_toml_str("case = \"phase\"\nn_o = [2]\nmethods = [\"m4\"]\n").unwrap_err()
        );
        assert!(err.contains("line 3"), "{err}");
        let err = format!(
            "{:#}",
            ExperimentConfig::from_toml_str("case = \"phase\"\nn_o = [2]\nmethods = []\nbogus = 1\n").unwrap_err()
        );
        assert!(err.contains("bogus"), "{err}");
    }
}
