//! Primal-dual interior-point method (HKM direction, Mehrotra predictor-corrector).

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use super::conic::{ConicProgram, ConicSolution, ConicSolver, SolverStatus, SparseSym};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPointSolver {
    /// Target for relative gap and primal/dual infeasibility.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for InteriorPointSolver {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 100 }
    }
}

impl InteriorPointSolver {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// `(ΔX, Δy, ΔZ)`.
type Step = (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>);

struct Layout<'a> {
    program: &'a ConicProgram,
    /// Constraints touching each block.
    by_block: Vec<Vec<(usize, &'a SparseSym)>>,
    b: DVector<f64>,
}

impl<'a> Layout<'a> {
    fn new(program: &'a ConicProgram) -> Result<Self> {
        let mut by_block = vec![Vec::new(); program.n_blocks()];
        for (j, con) in program.constraints.iter().enumerate() {
            for (blk, a) in &con.terms {
                let n = *program.block_dims.get(*blk).ok_or_else(|| {
                    Error::InvalidProblem(format!("constraint {j} references missing block {blk}"))
                })?;
                if a.entries.iter().any(|&(r, c, v)| r > c || c >= n || !v.is_finite()) {
                    return Err(Error::InvalidProblem(format!("constraint {j} has a malformed entry in block {blk}")));
                }
                by_block[*blk].push((j, a));
            }
        }
        for (c, &n) in program.objective.iter().zip(&program.block_dims) {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.nrows() });
            }
        }
        let b = DVector::from_iterator(program.n_constraints(), program.constraints.iter().map(|c| c.rhs));
        Ok(Self { program, by_block, b })
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// `A(X)`.
    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (blk, cons) in self.by_block.iter().enumerate() {
            for &(j, a) in cons {
                out[j] += a.inner(&x[blk]);
            }
        }
        out
    }

    /// `Aᵀ(y)` restricted to one block.
    fn adjoint_block(&self, blk: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.program.block_dims[blk];
        let mut out = DMatrix::zeros(n, n);
        for &(j, a) in &self.by_block[blk] {
            a.add_to(&mut out, y[j]);
        }
        out
    }
}

/// `X A G` for sparse symmetric `A`.
fn sandwich(x: &DMatrix<f64>, a: &SparseSym, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut q = DMatrix::zeros(n, n);
    for &(r, c, v) in &a.entries {
        q.ger(v, &x.column(r), &g.row(c).transpose(), 1.0);
        if r != c {
            q.ger(v, &x.column(c), &g.row(r).transpose(), 1.0);
        }
    }
    q
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `t` with `x + t dx ⪰ 0`, or `None` if `x` is not positive definite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let l = chol.l();
    let w = l.solve_lower_triangular(dx)?;
    let v = l.solve_lower_triangular(&w.transpose())?;
    let min = sym(v).symmetric_eigenvalues().min();
    Some(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

fn blocks_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

impl Measures {
    fn worst(&self) -> f64 {
        self.pinf.max(self.dinf).max(self.gap)
    }
}

impl InteriorPointSolver {
    fn initial_point(&self, layout: &Layout) -> Iterate {
        let p = layout.program;
        let mut x = Vec::with_capacity(p.n_blocks());
        let mut z = Vec::with_capacity(p.n_blocks());
        for (blk, &n) in p.block_dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 10.0f64.max(nf.sqrt());
            let mut eta: f64 = 10.0f64.max(nf.sqrt()).max(p.objective[blk].norm());
            for &(j, a) in &layout.by_block[blk] {
                let norm = a.to_dense(n).norm();
                xi = xi.max(nf * (1.0 + layout.b[j].abs()) / (1.0 + norm));
                eta = eta.max(norm);
            }
            x.push(DMatrix::identity(n, n) * xi);
            z.push(DMatrix::identity(n, n) * eta);
        }
        Iterate { x, y: DVector::zeros(layout.m()), z }
    }

    fn measures(&self, layout: &Layout, it: &Iterate, c_norm: f64) -> (Measures, DVector<f64>, Vec<DMatrix<f64>>) {
        let p = layout.program;
        let pobj = p.objective_value(&it.x);
        let dobj = layout.b.dot(&it.y);
        let rp = &layout.b - layout.apply(&it.x);
        let rd: Vec<DMatrix<f64>> = (0..p.n_blocks())
            .map(|blk| &p.objective[blk] - &it.z[blk] - layout.adjoint_block(blk, &it.y))
            .collect();
        let m = Measures {
            pobj,
            dobj,
            pinf: rp.norm() / (1.0 + layout.b.norm()),
            dinf: blocks_norm(&rd) / (1.0 + c_norm),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };
        (m, rp, rd)
    }

    fn finish(&self, it: Iterate, m: &Measures, status: SolverStatus, iterations: usize) -> ConicSolution {
        ConicSolution {
            x: it.x,
            y: it.y.iter().copied().collect(),
            status,
            primal_objective: m.pobj,
            dual_objective: m.dobj,
            primal_residual: m.pinf,
            dual_residual: m.dinf,
            gap: m.gap,
            iterations,
        }
    }
}

impl ConicSolver for InteriorPointSolver {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution> {
        let layout = Layout::new(program)?;
        let nb = program.n_blocks();
        let m = layout.m();
        let n_total: usize = program.block_dims.iter().sum();
        let c_norm = blocks_norm(&program.objective);

        let mut it = self.initial_point(&layout);
        let mut best: Option<(Iterate, Measures, usize)> = None;
        let mut failure = "iteration limit reached";

        for iter in 0..=self.max_iters {
            let (meas, rp, rd) = self.measures(&layout, &it, c_norm);
            debug!(
                "ipm {iter}: pobj {:.10e} dobj {:.10e} pinf {:.2e} dinf {:.2e} gap {:.2e}",
                meas.pobj, meas.dobj, meas.pinf, meas.dinf, meas.gap
            );
            if !meas.worst().is_finite() {
                failure = "non-finite iterate";
                break;
            }
            if meas.worst() <= self.tol {
                return Ok(self.finish(it, &meas, SolverStatus::Optimal, iter));
            }
            if best.as_ref().is_none_or(|(_, b, _)| meas.worst() < b.worst()) {
                best = Some((Iterate { x: it.x.clone(), y: it.y.clone(), z: it.z.clone() }, meas, iter));
            }
            if iter == self.max_iters {
                break;
            }

            let mu = blocks_dot(&it.x, &it.z) / n_total as f64;
            let Some(g) = it
                .z
                .iter()
                .map(|z| z.clone().cholesky().map(|c| c.inverse()))
                .collect::<Option<Vec<_>>>()
            else {
                failure = "dual iterate lost definiteness";
                break;
            };

            // Schur complement M_jk = ⟨A_j, X A_k G⟩
            let mut schur = DMatrix::<f64>::zeros(m, m);
            for (blk, cons) in layout.by_block.iter().enumerate() {
                for &(k, ak) in cons {
                    let q = sandwich(&it.x[blk], ak, &g[blk]);
                    for &(j, aj) in cons {
                        schur[(j, k)] += aj.inner(&q);
                    }
                }
            }
            let schur = sym(schur);
            let cholesky = schur.clone().cholesky();
            let lu = if cholesky.is_none() { Some(schur.clone().lu()) } else { None };
            let solve_schur = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
                match (&cholesky, &lu) {
                    (Some(ch), _) => Some(ch.solve(rhs)),
                    (None, Some(lu)) => lu.solve(rhs),
                    _ => None,
                }
            };

            let x_rd_g: Vec<DMatrix<f64>> = (0..nb).map(|blk| &it.x[blk] * &rd[blk] * &g[blk]).collect();
            let a_x_rd_g = layout.apply(&x_rd_g);

            // solves for the direction with centering term R_b
            let direction = |r: &[DMatrix<f64>]| -> Option<Step> {
                let rhs = &rp - layout.apply(r) + &a_x_rd_g;
                let dy = solve_schur(&rhs)?;
                let mut dx = Vec::with_capacity(nb);
                let mut dz = Vec::with_capacity(nb);
                for blk in 0..nb {
                    let dzb = &rd[blk] - layout.adjoint_block(blk, &dy);
                    let dxb = sym(&r[blk] - &it.x[blk] * &dzb * &g[blk]);
                    dx.push(dxb);
                    dz.push(dzb);
                }
                Some((dx, dy, dz))
            };
            let step_lengths = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> Option<(f64, f64)> {
                let mut a = f64::INFINITY;
                let mut b = f64::INFINITY;
                for blk in 0..nb {
                    a = a.min(max_step(&it.x[blk], &dx[blk])?);
                    b = b.min(max_step(&it.z[blk], &dz[blk])?);
                }
                Some((a, b))
            };

            let predictor_r: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
            let Some((dxp, _, dzp)) = direction(&predictor_r) else {
                failure = "Schur complement solve failed";
                break;
            };
            let Some((ap, bp)) = step_lengths(&dxp, &dzp) else {
                failure = "iterate lost definiteness";
                break;
            };
            let (ap, bp) = (ap.min(1.0), bp.min(1.0));
            let mu_aff: f64 = (0..nb)
                .map(|blk| (&it.x[blk] + &dxp[blk] * ap).dot(&(&it.z[blk] + &dzp[blk] * bp)))
                .sum::<f64>()
                / n_total as f64;
            let expon = (3.0 * ap.min(bp).powi(2)).max(1.0);
            let sigma = (mu_aff / mu).max(0.0).powf(expon).min(1.0);

            let corrector_r: Vec<DMatrix<f64>> = (0..nb)
                .map(|blk| &g[blk] * (sigma * mu) - &it.x[blk] - &dxp[blk] * &dzp[blk] * &g[blk])
                .collect();
            let Some((dx, dy, dz)) = direction(&corrector_r) else {
                failure = "Schur complement solve failed";
                break;
            };
            let Some((a, b)) = step_lengths(&dx, &dz) else {
                failure = "iterate lost definiteness";
                break;
            };
            let gamma = 0.9 + 0.09 * a.min(b).min(1.0);
            let (a, b) = ((gamma * a).min(1.0), (gamma * b).min(1.0));
            if a < 1e-12 && b < 1e-12 {
                failure = "step length collapsed";
                break;
            }
            for blk in 0..nb {
                it.x[blk] += &dx[blk] * a;
                it.z[blk] += &dz[blk] * b;
            }
            it.y += dy * b;
        }

        match best {
            Some((it, meas, iter)) if meas.worst() <= 10.0 * self.tol => {
                warn!("ipm stopped ({failure}); accepting near-optimal point with residual {:.2e}", meas.worst());
                Ok(self.finish(it, &meas, SolverStatus::NearOptimal, iter))
            }
            Some((_, meas, _)) => Err(Error::SolverFailure {
                reason: failure.to_string(),
                primal_residual: meas.pinf,
                dual_residual: meas.dinf,
                gap: meas.gap,
            }),
            None => Err(Error::SolverFailure {
                reason: failure.to_string(),
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
                gap: f64::NAN,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::conic::Constraint;

    fn diag(entries: &[(usize, f64)]) -> SparseSym {
        SparseSym { entries: entries.iter().map(|&(i, v)| (i, i, v)).collect() }
    }

    #[test]
    fn linear_program_as_diagonal_blocks() {
        // min x0 + 2 x1  s.t. x0 + x1 = 1, x ≥ 0  → 1
        let mut p = ConicProgram::new(vec![1, 1]);
        p.objective[0][(0, 0)] = 1.0;
        p.objective[1][(0, 0)] = 2.0;
        p.constraints.push(Constraint { terms: vec![(0, diag(&[(0, 1.0)])), (1, diag(&[(0, 1.0)]))], rhs: 1.0 });
        let sol = InteriorPointSolver::default().solve(&p).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-8);
        assert!((sol.x[0][(0, 0)] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn max_eigenvalue_sdp() {
        // min −⟨C, X⟩ s.t. tr X = 1 → −λ_max(C)
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 0.5]);
        let lmax = c.clone().symmetric_eigenvalues().max();
        let mut p = ConicProgram::new(vec![3]);
        p.objective[0] = -c;
        p.constraints.push(Constraint { terms: vec![(0, diag(&[(0, 1.0), (1, 1.0), (2, 1.0)]))], rhs: 1.0 });
        let sol = InteriorPointSolver::default().solve(&p).unwrap();
        assert!((sol.primal_objective + lmax).abs() < 1e-8);
        assert!((sol.dual_objective + lmax).abs() < 1e-8);
    }

    #[test]
    fn off_diagonal_constraint() {
        // min X00 + X11 s.t. X01 = 1 → 2 (X = [[1,1],[1,1]])
        let mut p = ConicProgram::new(vec![2]);
        p.objective[0] = DMatrix::identity(2, 2);
        p.constraints.push(Constraint { terms: vec![(0, SparseSym { entries: vec![(0, 1, 0.5)] })], rhs: 1.0 });
        let sol = InteriorPointSolver::default().solve(&p).unwrap();
        assert!((sol.primal_objective - 2.0).abs() < 1e-8);
        assert!((sol.x[0][(0, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_program_fails() {
        // X ⪰ 0 with X00 = −1
        let mut p = ConicProgram::new(vec![1]);
        p.constraints.push(Constraint { terms: vec![(0, diag(&[(0, 1.0)]))], rhs: -1.0 });
        let err = InteriorPointSolver { tol: 1e-9, max_iters: 50 }.solve(&p).unwrap_err();
        assert!(matches!(err, Error::SolverFailure { .. }));
    }

    #[test]
    fn malformed_constraint_rejected() {
        let mut p = ConicProgram::new(vec![2]);
        p.constraints.push(Constraint { terms: vec![(0, SparseSym { entries: vec![(1, 0, 1.0)] })], rhs: 1.0 });
        assert!(InteriorPointSolver::default().solve(&p).is_err());
        let mut p = ConicProgram::new(vec![2]);
        p.constraints.push(Constraint { terms: vec![(3, diag(&[(0, 1.0)]))], rhs: 1.0 });
        assert!(InteriorPointSolver::default().solve(&p).is_err());
    }

    #[test]
    fn sparse_sym_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 3.0]);
        let s = SparseSym::from_dense(&m, 0.0);
        assert_eq!(s.to_dense(2), m);
        assert!((s.inner(&m) - m.dot(&m)).abs() < 1e-15);
    }
}
