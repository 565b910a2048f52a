//! Standard-form block SDP and the solver boundary.
//!
//! ```text
//! minimize   Σ_b ⟨C_b, X_b⟩
//! subject to Σ_b ⟨A_jb, X_b⟩ = b_j,   X_b ⪰ 0
//! ```
//! with real symmetric blocks. The dual is `max bᵀy` s.t. `Σ_j y_j A_j + Z = C`.

use nalgebra::DMatrix;

use crate::error::Result;

/// Symmetric matrix given by its upper-triangular triplets `(row, col, value)`
/// with `row <= col`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    /// Upper-triangular triplets of a dense symmetric matrix, dropping
    /// entries below `drop_tol` in magnitude.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for c in 0..n {
            for r in 0..=c {
                let v = 0.5 * (m[(r, c)] + m[(c, r)]);
                if v.abs() > drop_tol {
                    entries.push((r, c, v));
                }
            }
        }
        Self { entries }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// `⟨self, M⟩ = tr(self · M)` for symmetric `M`.
    pub fn inner(&self, m: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * m[(r, r)] } else { v * (m[(r, c)] + m[(c, r)]) })
            .sum()
    }

    /// `out += alpha · self`.
    pub fn add_to(&self, out: &mut DMatrix<f64>, alpha: f64) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += alpha * v;
            if r != c {
                out[(c, r)] += alpha * v;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One linear equality `Σ_b ⟨A_b, X_b⟩ = rhs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, SparseSym)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub block_dims: Vec<usize>,
    /// Dense objective per block.
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new(block_dims: Vec<usize>) -> Self {
        let objective = block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        Self { block_dims, objective, constraints: Vec::new() }
    }

    pub fn add_block(&mut self, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.objective.push(DMatrix::zeros(dim, dim));
        self.block_dims.len() - 1
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// `⟨C, X⟩`.
    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c.dot(x)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    /// Converged to within 10× the requested tolerance.
    NearOptimal,
    Failed,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    pub status: SolverStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `‖b − A(X)‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖C − Z − Aᵀy‖ / (1 + ‖C‖)`.
    pub dual_residual: f64,
    /// `|pobj − dobj| / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    pub iterations: usize,
}

/// Any PSD-cone solver. Implementations must be stateless across calls.
pub trait ConicSolver: Send + Sync {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution>;
}
