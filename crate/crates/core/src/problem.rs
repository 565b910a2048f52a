//! Discretized Bayesian estimation problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelFamily, ChoiOperator};
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

/// A point in parameter space (1 or 3 components).
pub type Param = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    /// `θ_min + (θ_max − θ_min)(k − 1)/N`, endpoint excluded.
    #[default]
    Paper,
    /// `θ_min + (θ_max − θ_min)(k − ½)/N`.
    CellCentered,
}

pub fn make_grid(theta_min: f64, theta_max: f64, n: usize, scheme: GridScheme) -> Result<Vec<f64>> {
    if !theta_min.is_finite() || !theta_max.is_finite() || theta_max <= theta_min {
        return Err(Error::InvalidParameter(format!("invalid grid bounds [{theta_min}, {theta_max})")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("grid needs at least 2 points, got {n}")));
    }
    let offset = match scheme {
        GridScheme::Paper => 0.0,
        GridScheme::CellCentered => 0.5,
    };
    let width = theta_max - theta_min;
    Ok((0..n).map(|k| theta_min + width * (k as f64 + offset) / n as f64).collect())
}

/// Ordered, distinct hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisGrid {
    points: Vec<Param>,
}

impl HypothesisGrid {
    pub fn new(points: Vec<Param>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidProblem("empty hypothesis grid".into()));
        };
        let n_params = first.len();
        if n_params == 0 {
            return Err(Error::InvalidProblem("hypotheses need at least one component".into()));
        }
        for p in &points {
            if p.len() != n_params {
                return Err(Error::DimensionMismatch { expected: n_params, found: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let mut sorted: Vec<&Param> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidProblem("hypothesis grid has repeated points".into()));
        }
        Ok(Self { points })
    }

    /// Single-parameter grid.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn points(&self) -> &[Param] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.points[0].len()
    }
}

/// Prior weights aligned with a hypothesis grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    weights: Vec<f64>,
}

impl Prior {
    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("prior weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("prior weights sum to zero".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn uniform(grid: &HypothesisGrid) -> Self {
        let n = grid.len();
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// `∝ exp(−(θ − μ)²/(2σ²))` on a single-parameter grid.
    pub fn gaussian(grid: &HypothesisGrid, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("gaussian prior needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        if grid.n_params() != 1 {
            return Err(Error::InvalidParameter("gaussian prior is defined for single-parameter grids".into()));
        }
        let w = grid
            .points()
            .iter()
            .map(|p| (-(p[0] - mu).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        Self::from_weights(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Cos2,
    Mse,
    Msle,
    ChoiFidelity,
}

impl RewardKind {
    pub fn direction(self) -> Direction {
        match self {
            RewardKind::Cos2 | RewardKind::ChoiFidelity => Direction::Maximize,
            RewardKind::Mse | RewardKind::Msle => Direction::Minimize,
        }
    }

    /// `+1` for rewards, `−1` for costs: multiplying by this turns every
    /// score into a quantity to maximize.
    pub fn sign(self) -> f64 {
        match self.direction() {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

/// Unit quaternion `(cos|θ|, sin|θ| θ/|θ|)` of `exp(−iθ·σ)`.
pub fn su2_quaternion(theta: &[f64]) -> [f64; 4] {
    let norm = (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]).sqrt();
    let sinc = if norm < 1e-8 { 1.0 } else { norm.sin() / norm };
    [norm.cos(), theta[0] * sinc, theta[1] * sinc, theta[2] * sinc]
}

fn single(theta: &[f64], kind: RewardKind) -> Result<f64> {
    match theta {
        [x] => Ok(*x),
        _ => Err(Error::InvalidParameter(format!("{kind:?} reward takes one parameter, got {}", theta.len()))),
    }
}

/// Reward (or cost) of estimating `theta_hat` when the truth is `theta`.
pub fn reward(kind: RewardKind, theta: &[f64], theta_hat: &[f64]) -> Result<f64> {
    match kind {
        RewardKind::Cos2 => {
            let (t, e) = (single(theta, kind)?, single(theta_hat, kind)?);
            Ok((0.5 * (t - e)).cos().powi(2))
        }
        RewardKind::Mse => {
            let (t, e) = (single(theta, kind)?, single(theta_hat, kind)?);
            Ok((t - e).powi(2))
        }
        RewardKind::Msle => {
            let (t, e) = (single(theta, kind)?, single(theta_hat, kind)?);
            if !(t > 0.0) || !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("log error needs positive arguments, got ({t}, {e})")));
            }
            Ok((e / t).ln().powi(2))
        }
        RewardKind::ChoiFidelity => {
            if theta.len() != 3 || theta_hat.len() != 3 {
                return Err(Error::InvalidParameter("Choi fidelity reward takes SU(2) parameters".into()));
            }
            let (q, p) = (su2_quaternion(theta), su2_quaternion(theta_hat));
            let dot: f64 = q.iter().zip(&p).map(|(a, b)| a * b).sum();
            Ok(dot * dot)
        }
    }
}

/// Grid, prior, reward and the Choi operator at every hypothesis.
#[derive(Debug, Clone)]
pub struct EstimationProblem {
    grid: HypothesisGrid,
    prior: Prior,
    reward: RewardKind,
    chois: Vec<ChoiOperator>,
    d_in: usize,
    d_out: usize,
}

impl EstimationProblem {
    pub fn new(grid: HypothesisGrid, prior: Prior, reward: RewardKind, chois: Vec<ChoiOperator>) -> Result<Self> {
        if prior.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: prior.len() });
        }
        if chois.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: chois.len() });
        }
        let (d_in, d_out) = (chois[0].d_in(), chois[0].d_out());
        if let Some(c) = chois.iter().find(|c| c.d_in() != d_in || c.d_out() != d_out) {
            return Err(Error::DimensionMismatch { expected: d_in * d_out, found: c.d_in() * c.d_out() });
        }
        if reward == RewardKind::Msle && grid.points().iter().any(|p| p[0] <= 0.0) {
            return Err(Error::InvalidProblem("log error needs a positive grid".into()));
        }
        Ok(Self { grid, prior, reward, chois, d_in, d_out })
    }

    /// Evaluates `family` at every grid point.
    pub fn from_family(family: &ChannelFamily, grid: HypothesisGrid, prior: Prior, reward: RewardKind) -> Result<Self> {
        let chois = grid.points().par_iter().map(|p| family.choi(p)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, prior, reward, chois)
    }

    pub fn grid(&self) -> &HypothesisGrid {
        &self.grid
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward
    }

    pub fn chois(&self) -> &[ChoiOperator] {
        &self.chois
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// `X(θ̂_i) = sign · Σ_k p_k r(θ_k, θ̂_i) C_k`, so that the score of a
    /// tester is always maximized.
    pub fn assemble_x(&self, estimators: &[Param]) -> Result<Vec<HermitianMatrix>> {
        let sign = self.reward.sign();
        let kind = self.reward;
        self.assemble_x_with(estimators, |t, e| Ok(sign * reward(kind, t, e)?))
    }

    /// Same as [`Self::assemble_x`] for an arbitrary (already signed) reward.
    pub fn assemble_x_with<F>(&self, estimators: &[Param], r: F) -> Result<Vec<HermitianMatrix>>
    where
        F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
    {
        if estimators.is_empty() {
            return Err(Error::InvalidProblem("no estimators".into()));
        }
        let dim = self.d_in * self.d_out;
        estimators
            .par_iter()
            .map(|est| {
                let mut x = HermitianMatrix::zeros(dim);
                for ((theta, p), choi) in self.grid.points().iter().zip(self.prior.weights()).zip(&self.chois) {
                    let coeff = p * r(theta, est)?;
                    if coeff != 0.0 {
                        x += &(choi.matrix() * coeff);
                    }
                }
                Ok(x)
            })
            .collect()
    }
}

/// Cartesian product of per-axis grids and per-axis estimator values, in
/// lexicographic order (last axis fastest).
pub fn flatten_multiparameter(axes: &[Vec<f64>], estimator_axes: &[Vec<f64>]) -> Result<(HypothesisGrid, Vec<Param>)> {
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::InvalidParameter(format!("expected 1 to 3 axes, got {}", axes.len())));
    }
    if estimator_axes.len() != axes.len() {
        return Err(Error::DimensionMismatch { expected: axes.len(), found: estimator_axes.len() });
    }
    let grid = HypothesisGrid::new(cartesian_product(axes))?;
    Ok((grid, cartesian_product(estimator_axes)))
}

/// Lexicographic Cartesian product (last axis fastest).
pub fn cartesian_product(axes: &[Vec<f64>]) -> Vec<Param> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}
