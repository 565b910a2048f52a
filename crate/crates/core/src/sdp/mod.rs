//! Tester optimization as semidefinite programs.
//!
//! Complex Hermitian variables enter the real conic program through
//! [`real_embed`]; with every coefficient of the form `embed(H)/2`,
//! `⟨embed(H)/2, embed(T)⟩ = Re tr(HT)`.

pub mod conic;
pub mod ipm;

use nalgebra::DMatrix;

pub use conic::{ConicProgram, ConicSolution, ConicSolver, Constraint, SolverStatus, SparseSym};
pub use ipm::InteriorPointSolver;

use crate::error::{Error, Result};
use crate::linalg::{
    kron, partial_trace, partial_transpose, psd_sqrt, real_embed, real_unembed, BipartiteDims, HermitianMatrix,
    Subsystem, C64,
};

/// Tolerance on the tester marginal equalities.
pub const TOL_EQ: f64 = 1e-7;

/// Elements `T_i ⪰ 0` on input ⊗ output with `Σ T_i = σ ⊗ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tester {
    elements: Vec<HermitianMatrix>,
    sigma: HermitianMatrix,
    d_in: usize,
    d_out: usize,
}

impl Tester {
    /// Derives `σ = tr_out(Σ T_i) / d_out`; no feasibility check.
    pub fn new(elements: Vec<HermitianMatrix>, d_in: usize, d_out: usize) -> Result<Self> {
        let dims = BipartiteDims::new(d_in, d_out);
        let Some(first) = elements.first() else {
            return Err(Error::InfeasibleTester("tester has no elements".into()));
        };
        let mut total = HermitianMatrix::zeros(first.dim());
        for t in &elements {
            if t.dim() != dims.total() {
                return Err(Error::DimensionMismatch { expected: dims.total(), found: t.dim() });
            }
            total += t;
        }
        let sigma = partial_trace(&total, dims, Subsystem::Second)?.scale(1.0 / d_out as f64);
        Ok(Self { elements, sigma, d_in, d_out })
    }

    /// The one-outcome tester `{σ ⊗ 1}`.
    pub fn trivial(sigma: HermitianMatrix, d_out: usize) -> Result<Self> {
        let d_in = sigma.dim();
        Self::new(vec![sigma.kron(&HermitianMatrix::identity(d_out))], d_in, d_out)
    }

    /// `T_i = ρᵀ ⊗ M_i`.
    pub fn product(rho: &HermitianMatrix, povm: &[HermitianMatrix]) -> Result<Self> {
        let rt = rho.transpose();
        let d_out = povm.first().map_or(0, |m| m.dim());
        Self::new(povm.iter().map(|m| rt.kron(m)).collect(), rho.dim(), d_out)
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn dims(&self) -> BipartiteDims {
        BipartiteDims::new(self.d_in, self.d_out)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `Σ_i tr(X_i T_i)`.
    pub fn score(&self, x: &[HermitianMatrix]) -> Result<f64> {
        if x.len() != self.elements.len() {
            return Err(Error::DimensionMismatch { expected: self.elements.len(), found: x.len() });
        }
        Ok(x.iter().zip(&self.elements).map(|(x, t)| x.inner(t)).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TesterViolation {
    NegativeElement { index: usize, min_eigenvalue: f64 },
    /// `‖Σ T_i − σ ⊗ 1‖_max`.
    Marginal { deviation: f64 },
    /// `|tr σ − 1|`.
    Trace { deviation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TesterDiagnostics {
    pub min_eigenvalues: Vec<f64>,
    pub marginal_deviation: f64,
    pub trace_deviation: f64,
}

impl TesterDiagnostics {
    pub fn of(tester: &Tester) -> Self {
        let mut total = HermitianMatrix::zeros(tester.dims().total());
        for t in &tester.elements {
            total += t;
        }
        let product = tester.sigma.kron(&HermitianMatrix::identity(tester.d_out));
        Self {
            min_eigenvalues: tester.elements.iter().map(|t| t.min_eigenvalue()).collect(),
            marginal_deviation: total.max_abs_diff(&product),
            trace_deviation: (tester.sigma.trace() - 1.0).abs(),
        }
    }

    pub fn violations(&self, tol: f64) -> Vec<TesterViolation> {
        let mut out: Vec<TesterViolation> = self
            .min_eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < -tol)
            .map(|(index, &min_eigenvalue)| TesterViolation::NegativeElement { index, min_eigenvalue })
            .collect();
        if self.marginal_deviation > tol {
            out.push(TesterViolation::Marginal { deviation: self.marginal_deviation });
        }
        if self.trace_deviation > tol {
            out.push(TesterViolation::Trace { deviation: self.trace_deviation });
        }
        out
    }

    pub fn worst(&self) -> f64 {
        let neg = self.min_eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(-l));
        neg.max(self.marginal_deviation).max(self.trace_deviation)
    }
}

pub fn verify_tester(tester: &Tester, tol: f64) -> Vec<TesterViolation> {
    TesterDiagnostics::of(tester).violations(tol)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TesterConstraintSet {
    General,
    /// Adds `T_i^{T_in} ⪰ 0`.
    Ppt,
    /// `T_i = ρᵀ ⊗ M_i` with `ρ` given.
    ProductFixedState(HermitianMatrix),
    /// `T_i = ρᵀ ⊗ M_i` with the POVM given.
    ProductFixedPovm(Vec<HermitianMatrix>),
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `Σ_i tr(X_i T_i)` at the returned tester.
    pub score: f64,
    pub tester: Tester,
    pub status: SolverStatus,
    pub primal_residual: f64,
    pub dual_gap: f64,
}

/// Orthonormal basis of `d × d` Hermitian matrices under `Re tr(AB)`.
fn hermitian_basis(d: usize) -> Vec<HermitianMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in a..d {
            let mut m = DMatrix::<C64>::zeros(d, d);
            if a == b {
                m[(a, a)] = C64::new(1.0, 0.0);
                out.push(HermitianMatrix::symmetrized(m));
                continue;
            }
            m[(a, b)] = C64::new(r, 0.0);
            m[(b, a)] = C64::new(r, 0.0);
            out.push(HermitianMatrix::symmetrized(m.clone()));
            m[(a, b)] = C64::new(0.0, r);
            m[(b, a)] = C64::new(0.0, -r);
            out.push(HermitianMatrix::symmetrized(m));
        }
    }
    out
}

/// Coefficient `embed(H)/2`.
fn coeff(h: &HermitianMatrix) -> SparseSym {
    SparseSym::from_dense(&(real_embed(h) * 0.5), 0.0)
}

fn objective_block(x: &HermitianMatrix) -> DMatrix<f64> {
    real_embed(x) * -0.5
}

fn check_x(x: &[HermitianMatrix], dim: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidProblem("no X operators".into()));
    }
    match x.iter().find(|m| m.dim() != dim) {
        Some(m) => Err(Error::DimensionMismatch { expected: dim, found: m.dim() }),
        None => Ok(()),
    }
}

/// POVM program: maximize `Σ tr(Y_i M_i)` over `M_i ⪰ 0`, `Σ M_i = 1`.
fn povm_program(y: &[HermitianMatrix]) -> ConicProgram {
    let d = y[0].dim();
    let mut p = ConicProgram::new(Vec::new());
    for yi in y {
        let blk = p.add_block(2 * d);
        p.objective[blk] = objective_block(yi);
    }
    for basis in hermitian_basis(d) {
        let c = coeff(&basis);
        p.constraints.push(Constraint { terms: (0..y.len()).map(|i| (i, c.clone())).collect(), rhs: basis.trace() });
    }
    p
}

/// Marginal-constrained tester program, optionally with PPT blocks.
fn tester_program(x: &[HermitianMatrix], dims: BipartiteDims, ppt: bool) -> Result<ConicProgram> {
    let n = x.len();
    let dim = dims.total();
    let mut p = ConicProgram::new(Vec::new());
    for xi in x {
        let blk = p.add_block(2 * dim);
        p.objective[blk] = objective_block(xi);
    }
    let sigma = p.add_block(2 * dims.first);
    let basis = hermitian_basis(dim);
    for b in &basis {
        let mut terms: Vec<(usize, SparseSym)> = (0..n).map(|i| (i, coeff(b))).collect();
        let reduced = coeff(&partial_trace(b, dims, Subsystem::Second)?);
        if !reduced.is_empty() {
            terms.push((sigma, SparseSym { entries: reduced.entries.iter().map(|&(r, c, v)| (r, c, -v)).collect() }));
        }
        p.constraints.push(Constraint { terms, rhs: 0.0 });
    }
    p.constraints.push(Constraint {
        terms: vec![(sigma, coeff(&HermitianMatrix::identity(dims.first)))],
        rhs: 1.0,
    });
    if ppt {
        let transposed: Vec<SparseSym> = basis
            .iter()
            .map(|b| Ok(coeff(&partial_transpose(b, dims, Subsystem::First)?)))
            .collect::<Result<_>>()?;
        for i in 0..n {
            let w = p.add_block(2 * dim);
            for (b, bt) in basis.iter().zip(&transposed) {
                let neg = SparseSym { entries: bt.entries.iter().map(|&(r, c, v)| (r, c, -v)).collect() };
                p.constraints.push(Constraint { terms: vec![(w, coeff(b)), (i, neg)], rhs: 0.0 });
            }
        }
    }
    Ok(p)
}

fn unembed_blocks(sol: &ConicSolution, range: std::ops::Range<usize>) -> Result<Vec<HermitianMatrix>> {
    sol.x[range].iter().map(real_unembed).collect()
}

fn report(x: &[HermitianMatrix], tester: Tester, sol: &ConicSolution) -> Result<SolveReport> {
    let score = tester.score(x)?;
    Ok(SolveReport { score, tester, status: sol.status, primal_residual: sol.primal_residual, dual_gap: sol.gap })
}

/// `tr_in((ρᵀ ⊗ 1) X_i)` for every `i`.
fn reduce_by_state(x: &[HermitianMatrix], rho: &HermitianMatrix, dims: BipartiteDims) -> Result<Vec<HermitianMatrix>> {
    let k = kron(psd_sqrt(&rho.transpose())?.matrix(), &DMatrix::identity(dims.second, dims.second));
    x.iter().map(|xi| partial_trace(&xi.conjugate_by(&k), dims, Subsystem::First)).collect()
}

/// `Σ_i tr_out((1 ⊗ M_i) X_i)`.
fn reduce_by_povm(x: &[HermitianMatrix], povm: &[HermitianMatrix], dims: BipartiteDims) -> Result<HermitianMatrix> {
    if povm.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: povm.len() });
    }
    let mut a = HermitianMatrix::zeros(dims.first);
    for (xi, m) in x.iter().zip(povm) {
        let k = kron(&DMatrix::identity(dims.first, dims.first), psd_sqrt(m)?.matrix());
        a += &partial_trace(&xi.conjugate_by(&k), dims, Subsystem::Second)?;
    }
    Ok(a)
}

fn check_state(rho: &HermitianMatrix, d: usize) -> Result<()> {
    if rho.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
    }
    if (rho.trace() - 1.0).abs() > TOL_EQ || !rho.is_psd(crate::linalg::TOL_PSD) {
        return Err(Error::InvalidParameter("probe state must be PSD with unit trace".into()));
    }
    Ok(())
}

fn check_povm(povm: &[HermitianMatrix], d: usize) -> Result<()> {
    let mut total = HermitianMatrix::zeros(d);
    for m in povm {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
        if !m.is_psd(crate::linalg::TOL_PSD) {
            return Err(Error::InvalidParameter("POVM element is not PSD".into()));
        }
        total += m;
    }
    if total.max_abs_diff(&HermitianMatrix::identity(d)) > TOL_EQ {
        return Err(Error::InvalidParameter("POVM elements do not sum to identity".into()));
    }
    Ok(())
}

/// Maximizes `Σ_i tr(X_i T_i)` over the tester set `constraints` with the default solver.
pub fn solve_tester_sdp(
    x: &[HermitianMatrix],
    d_in: usize,
    d_out: usize,
    constraints: &TesterConstraintSet,
) -> Result<SolveReport> {
    solve_tester_sdp_with(&InteriorPointSolver::default(), x, d_in, d_out, constraints)
}

pub fn solve_tester_sdp_with(
    solver: &dyn ConicSolver,
    x: &[HermitianMatrix],
    d_in: usize,
    d_out: usize,
    constraints: &TesterConstraintSet,
) -> Result<SolveReport> {
    let dims = BipartiteDims::new(d_in, d_out);
    check_x(x, dims.total())?;
    match constraints {
        TesterConstraintSet::General | TesterConstraintSet::Ppt => {
            let ppt = matches!(constraints, TesterConstraintSet::Ppt);
            let sol = solver.solve(&tester_program(x, dims, ppt)?)?;
            let tester = Tester::new(unembed_blocks(&sol, 0..x.len())?, d_in, d_out)?;
            report(x, tester, &sol)
        }
        TesterConstraintSet::ProductFixedState(rho) => solve_povm_given_state_with(solver, x, d_in, d_out, rho),
        TesterConstraintSet::ProductFixedPovm(povm) => {
            check_povm(povm, d_out)?;
            let a = reduce_by_povm(x, povm, dims)?;
            let mut p = ConicProgram::new(vec![2 * d_in]);
            p.objective[0] = objective_block(&a);
            p.constraints.push(Constraint { terms: vec![(0, coeff(&HermitianMatrix::identity(d_in)))], rhs: 1.0 });
            let sol = solver.solve(&p)?;
            let rho_t = real_unembed(&sol.x[0])?;
            let tester = Tester::product(&rho_t.transpose(), povm)?;
            report(x, tester, &sol)
        }
    }
}

/// Best POVM for a fixed probe state `rho` (on the input space).
pub fn solve_povm_given_state(x: &[HermitianMatrix], d_in: usize, d_out: usize, rho: &HermitianMatrix) -> Result<SolveReport> {
    solve_povm_given_state_with(&InteriorPointSolver::default(), x, d_in, d_out, rho)
}

pub fn solve_povm_given_state_with(
    solver: &dyn ConicSolver,
    x: &[HermitianMatrix],
    d_in: usize,
    d_out: usize,
    rho: &HermitianMatrix,
) -> Result<SolveReport> {
    let dims = BipartiteDims::new(d_in, d_out);
    check_x(x, dims.total())?;
    check_state(rho, d_in)?;
    let y = reduce_by_state(x, rho, dims)?;
    let sol = solver.solve(&povm_program(&y))?;
    let povm = unembed_blocks(&sol, 0..x.len())?;
    report(x, Tester::product(rho, &povm)?, &sol)
}

/// Best probe state for a fixed POVM: `ρᵀ` is the top eigenprojector of
/// `A = Σ_i tr_out((1 ⊗ M_i) X_i)`.
pub fn solve_state_given_povm(x: &[HermitianMatrix], d_in: usize, d_out: usize, povm: &[HermitianMatrix]) -> Result<SolveReport> {
    let dims = BipartiteDims::new(d_in, d_out);
    check_x(x, dims.total())?;
    check_povm(povm, d_out)?;
    let a = reduce_by_povm(x, povm, dims)?;
    let (values, vectors) = a.eigh();
    let top = vectors.column(d_in - 1).into_owned();
    let rho = HermitianMatrix::projector(&top).transpose();
    let tester = Tester::product(&rho, povm)?;
    let score = tester.score(x)?;
    debug_assert!((score - values[d_in - 1]).abs() < 1e-8 * (1.0 + score.abs()));
    Ok(SolveReport { score, tester, status: SolverStatus::Optimal, primal_residual: 0.0, dual_gap: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{choi_of_unitary, phase_channel, su2_channel};
    use crate::linalg::ComplexMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> HermitianMatrix {
        let m = ComplexMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::symmetrized(&m + m.adjoint())
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> HermitianMatrix {
        let m = ComplexMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let p = HermitianMatrix::symmetrized(&m * m.adjoint());
        let tr = p.trace();
        p.scale(1.0 / tr)
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn trivial_tester_is_valid() {
        let t = Tester::trivial(HermitianMatrix::identity(3).scale(1.0 / 3.0), 3).unwrap();
        assert!(verify_tester(&t, 1e-9).is_empty());
    }

    #[test]
    fn scaled_element_is_reported() {
        let sigma = HermitianMatrix::from_real_diagonal(&[0.5, 0.5]);
        let p0 = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let p1 = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        let good = Tester::new(vec![sigma.kron(&p0), sigma.kron(&p1)], 2, 2).unwrap();
        assert!(verify_tester(&good, 1e-9).is_empty());
        let bad = Tester::new(vec![sigma.kron(&p0).scale(1.1), sigma.kron(&p1)], 2, 2).unwrap();
        let v = verify_tester(&bad, 1e-9);
        assert!(v.iter().any(|v| matches!(v, TesterViolation::Marginal { .. })));
        assert!(v.iter().any(|v| matches!(v, TesterViolation::Trace { .. })));
    }

    #[test]
    fn single_outcome_choi_scores_one() {
        let choi = su2_channel(&[0.3, -0.5, 1.1]).unwrap();
        let r = solve_tester_sdp(&[choi.matrix().clone()], 2, 2, &TesterConstraintSet::General).unwrap();
        assert!((r.score - 1.0).abs() < 1e-8);
        assert_eq!(r.status, SolverStatus::Optimal);
    }

    #[test]
    fn single_outcome_optimizes_sigma() {
        // X = A ⊗ 1 forces score = d_out · λ_max(A)
        let a = HermitianMatrix::from_real_diagonal(&[0.2, 0.9, -0.4]);
        let x = a.kron(&HermitianMatrix::identity(2));
        let r = solve_tester_sdp(&[x], 3, 2, &TesterConstraintSet::General).unwrap();
        assert!((r.score - 1.8).abs() < 1e-8);
        assert!(r.tester.sigma().max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 0.0])) < 1e-4);
    }

    #[test]
    fn two_phase_discrimination_is_perfect() {
        let c0 = phase_channel(3, 0.0).unwrap();
        let cpi = phase_channel(3, PI).unwrap();
        let x = vec![c0.matrix().scale(0.5), cpi.matrix().scale(0.5)];
        for set in [TesterConstraintSet::General, TesterConstraintSet::Ppt] {
            let r = solve_tester_sdp(&x, 3, 3, &set).unwrap();
            assert!((r.score - 1.0).abs() < 1e-7, "{set:?}: {}", r.score);
            assert!(TesterDiagnostics::of(&r.tester).worst() < 1e-6);
        }
    }

    #[test]
    fn constant_reward_scores_one_for_any_outcome_count() {
        let mut avg = HermitianMatrix::zeros(4);
        for t in [0.0, 0.7, 2.0] {
            avg += &su2_channel(&[t, 0.1, -t]).unwrap().matrix().scale(1.0 / 3.0);
        }
        for n in [1, 3, 5] {
            let r = solve_tester_sdp(&vec![avg.clone(); n], 2, 2, &TesterConstraintSet::General).unwrap();
            assert!((r.score - 1.0).abs() < 1e-8);
        }
        let rho = HermitianMatrix::from_real_diagonal(&[0.3, 0.7]);
        let r = solve_povm_given_state(&vec![avg.clone(); 2], 2, 2, &rho).unwrap();
        assert!((r.score - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_state_single_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_hermitian(&mut rng, 4);
        let rho = random_state(&mut rng, 2);
        let r = solve_povm_given_state(std::slice::from_ref(&x), 2, 2, &rho).unwrap();
        let expected = x.inner(&rho.transpose().kron(&HermitianMatrix::identity(2)));
        assert!((r.score - expected).abs() < 1e-8);
    }

    // Enumerates projective qubit measurements {|n⟩⟨n|, |−n⟩⟨−n|} on a Bloch grid.
    fn best_projective_score(x: &[HermitianMatrix], rho: &HermitianMatrix) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let steps = 400;
        for a in 0..=steps {
            let polar = PI * a as f64 / steps as f64;
            for b in 0..(2 * steps) {
                let azim = PI * b as f64 / steps as f64;
                let v = crate::linalg::ComplexVector::from_vec(vec![
                    c((polar / 2.0).cos(), 0.0),
                    C64::from_polar((polar / 2.0).sin(), azim),
                ]);
                let p = HermitianMatrix::projector(&v);
                let q = &HermitianMatrix::identity(2) - &p;
                let t = Tester::product(rho, &[p, q]).unwrap();
                best = best.max(t.score(x).unwrap());
            }
        }
        best
    }

    #[test]
    fn fixed_state_matches_projective_enumeration() {
        let rho = HermitianMatrix::from_real_diagonal(&[0.8, 0.2]);
        let v = crate::linalg::ComplexVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let p = HermitianMatrix::projector(&v);
        let q = &HermitianMatrix::identity(2) - &p;
        let x = vec![rho.transpose().kron(&p), rho.transpose().kron(&q)];
        let r = solve_povm_given_state(&x, 2, 2, &rho).unwrap();
        let oracle = best_projective_score(&x, &rho);
        assert!(r.score >= oracle - 1e-6);
        assert!((r.score - oracle).abs() < 1e-4);
        let m0 = &r.tester.elements()[0];
        let recovered = partial_trace(m0, r.tester.dims(), Subsystem::First).unwrap().scale(1.0 / rho.trace());
        assert!(recovered.max_abs_diff(&p) < 1e-4);
    }

    #[test]
    fn fixed_povm_examples() {
        let x = vec![HermitianMatrix::from_real_diagonal(&[0.2, 0.2, 0.8, 0.8]).scale(0.5)];
        let r = solve_state_given_povm(&x, 2, 2, &[HermitianMatrix::identity(2)]).unwrap();
        assert!((r.score - 0.8).abs() < 1e-14);
        let rho = r.tester.sigma();
        assert!(rho.max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn fixed_povm_eigen_matches_sdp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let x: Vec<HermitianMatrix> = (0..3).map(|_| random_hermitian(&mut rng, 6)).collect();
            let s1 = random_state(&mut rng, 2).scale(0.5);
            let s2 = random_state(&mut rng, 2).scale(0.5);
            let s3 = &(&HermitianMatrix::identity(2) - &s1) - &s2;
            let povm = vec![s1, s2, s3];
            let eig = solve_state_given_povm(&x, 3, 2, &povm).unwrap();
            let sdp = solve_tester_sdp(&x, 3, 2, &TesterConstraintSet::ProductFixedPovm(povm)).unwrap();
            assert!((eig.score - sdp.score).abs() < 1e-7, "{} vs {}", eig.score, sdp.score);
        }
    }

    #[test]
    fn ordering_of_constraint_sets_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..4 {
            let x: Vec<HermitianMatrix> = (0..3).map(|_| random_hermitian(&mut rng, 4)).collect();
            let general = solve_tester_sdp(&x, 2, 2, &TesterConstraintSet::General).unwrap();
            let ppt = solve_tester_sdp(&x, 2, 2, &TesterConstraintSet::Ppt).unwrap();
            let rho = random_state(&mut rng, 2);
            let product = solve_povm_given_state(&x, 2, 2, &rho).unwrap();
            assert!(ppt.score <= general.score + 1e-7);
            assert!(product.score <= ppt.score + 1e-7);
            for t in ppt.tester.elements() {
                let pt = partial_transpose(t, ppt.tester.dims(), Subsystem::First).unwrap();
                assert!(pt.min_eigenvalue() > -1e-7);
            }
            assert!(TesterDiagnostics::of(&general.tester).worst() < 1e-6);
        }
    }

    #[test]
    fn unitary_discrimination_upper_bound() {
        // two qubit unitaries with |tr(U†V)|/2 = cos(0.4): optimal success = (1 + sin 0.4)/2
        let u = ComplexMatrix::identity(2, 2);
        let v = crate::channels::su2_unitary(&[0.0, 0.0, 0.4]);
        let x = vec![choi_of_unitary(&u).unwrap().matrix().scale(0.5), choi_of_unitary(&v).unwrap().matrix().scale(0.5)];
        let r = solve_tester_sdp(&x, 2, 2, &TesterConstraintSet::General).unwrap();
        let expected = 0.5 * (1.0 + (1.0 - 0.4f64.cos().powi(2)).sqrt());
        assert!((r.score - expected).abs() < 1e-7);
    }

    #[test]
    fn dimension_errors() {
        let x = vec![HermitianMatrix::identity(3)];
        assert!(solve_tester_sdp(&x, 2, 2, &TesterConstraintSet::General).is_err());
        assert!(solve_tester_sdp(&[], 2, 2, &TesterConstraintSet::General).is_err());
        let bad_povm = vec![HermitianMatrix::identity(2).scale(0.4)];
        assert!(solve_state_given_povm(&[HermitianMatrix::identity(4)], 2, 2, &bad_povm).is_err());
    }
}
