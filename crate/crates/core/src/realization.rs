//! Physical realizations of testers: an entangled probe on input ⊗ auxiliary
//! and a POVM on auxiliary ⊗ output.
//!
//! With `|ψ⟩ = (1 ⊗ √σ) Σ_i |ii⟩` and `M_i = (σ^{-1/2} ⊗ 1) T_i (σ^{-1/2} ⊗ 1)`,
//! sending the input half of `|ψ⟩` through a channel with Choi operator `C`
//! and measuring `{M_i}` yields outcome `i` with probability `tr(T_i C)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    kron, partial_transpose, psd_pinv_sqrt, psd_pinv_sqrt_with_cutoff, schmidt, BipartiteDims, ComplexMatrix,
    ComplexVector, HermitianMatrix, Subsystem, C64,
};
use crate::sdp::{verify_tester, Tester, TOL_EQ};

/// Eigenvalues of `σ` at or below this are treated as its kernel.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// Pure state on input ⊗ auxiliary, auxiliary dimension `d_in`.
    pub rho: HermitianMatrix,
    /// Elements on auxiliary ⊗ output.
    pub povm: Vec<HermitianMatrix>,
    /// Largest squared Schmidt coefficient of the probe.
    pub schmidt_p0: f64,
    pub d_in: usize,
    pub d_out: usize,
}

/// Probe state and POVM reproducing `tester`.
///
/// On the kernel of `σ` the POVM is completed by adding `P_ker ⊗ 1` to the
/// first element. Support elements are renormalized by `S^{-1/2}` with
/// `S = Σ M_i` so that small marginal residuals of a numerical tester do not
/// break completeness.
pub fn extract_realization(tester: &Tester) -> Result<Realization> {
    let bad = verify_tester(tester, TOL_EQ);
    if !bad.is_empty() {
        return Err(Error::InfeasibleTester(format!("{bad:?}")));
    }
    let (d_in, d_out) = (tester.d_in(), tester.d_out());
    let sigma = tester.sigma();

    let (values, vectors) = sigma.eigh();
    let mut psi = ComplexVector::zeros(d_in * d_in);
    let root = crate::linalg::psd_sqrt(sigma)?;
    for i in 0..d_in {
        for a in 0..d_in {
            psi[i * d_in + a] = root.matrix()[(a, i)];
        }
    }
    let rho = HermitianMatrix::projector(&psi);

    let lift = kron(psd_pinv_sqrt_with_cutoff(sigma, SUPPORT_CUTOFF)?.matrix(), &ComplexMatrix::identity(d_out, d_out));
    let raw: Vec<HermitianMatrix> = tester.elements().iter().map(|t| t.conjugate_by(&lift)).collect();
    let mut total = HermitianMatrix::zeros(d_in * d_out);
    for m in &raw {
        total += m;
    }
    let fix = psd_pinv_sqrt(&total)?;
    let mut povm: Vec<HermitianMatrix> = raw.iter().map(|m| m.conjugate_by(fix.matrix())).collect();

    let mut kernel = ComplexMatrix::zeros(d_in, d_in);
    for (k, &l) in values.iter().enumerate() {
        if l <= SUPPORT_CUTOFF {
            let v = vectors.column(k);
            kernel += v * v.adjoint();
        }
    }
    if kernel.iter().any(|z| z.norm() > 0.0) {
        let block = HermitianMatrix::new(kron(&kernel, &ComplexMatrix::identity(d_out, d_out)))?;
        povm[0] += &block;
    }

    let schmidt_p0 = values.iter().fold(0.0f64, |a, &l| a.max(l)) / sigma.trace();
    Ok(Realization { rho, povm, schmidt_p0, d_in, d_out })
}

/// `tr_aux((ρ^{T_in} ⊗ 1)(1 ⊗ M))` on input ⊗ output, by direct index
/// contraction.
pub fn reconstruct_element(rho: &HermitianMatrix, m: &HermitianMatrix, d_in: usize, d_out: usize) -> Result<HermitianMatrix> {
    let rho_pt = partial_transpose(rho, BipartiteDims::new(d_in, d_in), Subsystem::First)?;
    let (r, m) = (rho_pt.matrix(), m.matrix());
    let out = ComplexMatrix::from_fn(d_in * d_out, d_in * d_out, |row, col| {
        let (i, o) = (row / d_out, row % d_out);
        let (j, o2) = (col / d_out, col % d_out);
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..d_in {
            for c in 0..d_in {
                acc += r[(i * d_in + a, j * d_in + c)] * m[(c * d_out + o, a * d_out + o2)];
            }
        }
        acc
    });
    HermitianMatrix::new(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RealizationViolation {
    /// `‖reconstructed T_i − P T_i P‖_max` with `P` the support of `σ ⊗ 1`.
    Reconstruction { index: usize, deviation: f64 },
    /// `‖Σ M_i − 1‖_max`.
    Completeness { deviation: f64 },
    /// `|tr ρ − 1|`.
    Trace { deviation: f64 },
    NegativeElement { index: usize, min_eigenvalue: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationDiagnostics {
    pub reconstruction: Vec<f64>,
    pub completeness: f64,
    pub trace: f64,
    pub min_eigenvalues: Vec<f64>,
}

impl RealizationDiagnostics {
    pub fn of(real: &Realization, tester: &Tester) -> Result<Self> {
        if real.povm.len() != tester.len() {
            return Err(Error::DimensionMismatch { expected: tester.len(), found: real.povm.len() });
        }
        if (real.d_in, real.d_out) != (tester.d_in(), tester.d_out()) {
            return Err(Error::DimensionMismatch { expected: tester.d_in() * tester.d_out(), found: real.d_in * real.d_out });
        }
        let (values, vectors) = tester.sigma().eigh();
        let mut support = ComplexMatrix::zeros(real.d_in, real.d_in);
        for (k, &l) in values.iter().enumerate() {
            if l > SUPPORT_CUTOFF {
                let v = vectors.column(k);
                support += v * v.adjoint();
            }
        }
        let p = kron(&support, &ComplexMatrix::identity(real.d_out, real.d_out));
        let reconstruction = real
            .povm
            .iter()
            .zip(tester.elements())
            .map(|(m, t)| Ok(reconstruct_element(&real.rho, m, real.d_in, real.d_out)?.max_abs_diff(&t.conjugate_by(&p))))
            .collect::<Result<Vec<f64>>>()?;
        let mut total = HermitianMatrix::zeros(real.d_in * real.d_out);
        for m in &real.povm {
            total += m;
        }
        Ok(Self {
            reconstruction,
            completeness: total.max_abs_diff(&HermitianMatrix::identity(real.d_in * real.d_out)),
            trace: (real.rho.trace() - 1.0).abs(),
            min_eigenvalues: real.povm.iter().map(|m| m.min_eigenvalue()).collect(),
        })
    }

    pub fn violations(&self, tol: f64) -> Vec<RealizationViolation> {
        let mut out: Vec<RealizationViolation> = self
            .reconstruction
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > tol)
            .map(|(index, &deviation)| RealizationViolation::Reconstruction { index, deviation })
            .collect();
        out.extend(
            self.min_eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -tol)
                .map(|(index, &min_eigenvalue)| RealizationViolation::NegativeElement { index, min_eigenvalue }),
        );
        if self.completeness > tol {
            out.push(RealizationViolation::Completeness { deviation: self.completeness });
        }
        if self.trace > tol {
            out.push(RealizationViolation::Trace { deviation: self.trace });
        }
        out
    }

    pub fn worst(&self) -> f64 {
        let neg = self.min_eigenvalues.iter().fold(0.0f64, |a, &l| a.max(-l));
        self.reconstruction.iter().fold(neg, |a, &d| a.max(d)).max(self.completeness).max(self.trace)
    }
}

pub fn verify_realization(real: &Realization, tester: &Tester, tol: f64) -> Result<Vec<RealizationViolation>> {
    Ok(RealizationDiagnostics::of(real, tester)?.violations(tol))
}

/// Schmidt form `√p0 |n⟩|a0⟩ + √p1 |n⊥⟩|a1⟩` of a qubit probe.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementProfile {
    pub p0: f64,
    pub p1: f64,
    /// Bloch vector of the input-side Schmidt vector with weight `p0`.
    pub bloch: [f64; 3],
    pub dominant: ComplexVector,
}

pub fn entanglement_profile(real: &Realization) -> Result<EntanglementProfile> {
    if real.d_in != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: real.d_in });
    }
    let (values, vectors) = real.rho.eigh();
    let top = values.len() - 1;
    let rest: f64 = values[..top].iter().map(|l| l.abs()).sum();
    if rest > 1e-8 * values[top].abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("probe state is not pure (residual weight {rest:e})")));
    }
    let psi = vectors.column(top).into_owned();
    let dec = schmidt(&psi, BipartiteDims::new(2, 2))?;
    let p0 = dec.coefficients[0].powi(2);
    let p1 = dec.coefficients.get(1).map_or(0.0, |c| c.powi(2));
    let n = &dec.left[0];
    let cross = n[0].conj() * n[1];
    Ok(EntanglementProfile {
        p0,
        p1,
        bloch: [2.0 * cross.re, 2.0 * cross.im, n[0].norm_sqr() - n[1].norm_sqr()],
        dominant: n.clone(),
    })
}
