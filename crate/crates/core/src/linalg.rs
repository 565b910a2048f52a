//! Dense complex Hermitian linear algebra.
//!
//! Everything here is small (dimension at most a few dozen), so matrices are
//! stored densely in `nalgebra` containers. Bipartite operators always use the
//! ordering `first ⊗ second`, with row index `i * d_second + k`.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Eigenvalues in `[-TOL_PSD, 0)` are treated as zero.
pub const TOL_PSD: f64 = 1e-9;

/// Largest entrywise deviation from Hermiticity accepted before symmetrizing.
pub const TOL_HERM: f64 = 1e-6;

/// Factor dimensions of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteDims {
    pub first: usize,
    pub second: usize,
}

impl BipartiteDims {
    pub fn new(first: usize, second: usize) -> Self {
        Self { first, second }
    }

    pub fn total(&self) -> usize {
        self.first * self.second
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.second, self.first)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.total() != dim {
            return Err(Error::DimensionMismatch { expected: self.total(), found: dim });
        }
        Ok(())
    }
}

/// Which tensor factor an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
}

impl HermitianMatrix {
    /// Validates approximate Hermiticity and stores `(A + A†)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let deviation = max_abs(&(&m - m.adjoint()));
        if deviation > TOL_HERM {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without the tolerance check. Callers guarantee Hermiticity
    /// up to rounding.
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj) * C64::new(0.5, 0.0) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: ComplexMatrix::identity(n, n) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self { m }
    }

    /// Real symmetric matrix promoted to a Hermitian one.
    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &ComplexVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Hilbert–Schmidt inner product `tr(A B)`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, ComplexMatrix) {
        let eig = SymmetricEigen::new(self.m.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = ComplexMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(k));
        }
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > tol).count()
    }

    /// Full transpose, equal to the entrywise conjugate.
    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * C64::new(s, 0.0) }
    }

    /// `K A K†`.
    pub fn conjugate_by(&self, k: &ComplexMatrix) -> Self {
        Self::symmetrized(k * &self.m * k.adjoint())
    }

    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        Self { m: kron(&self.m, &other.m) }
    }

    /// Largest entrywise deviation between two matrices of equal dimension.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        max_abs(&(&self.m - &other.m))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }
}

impl Add<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl AddAssign<&HermitianMatrix> for HermitianMatrix {
    fn add_assign(&mut self, rhs: &HermitianMatrix) {
        self.m += &rhs.m;
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// Kronecker product, `(A⊗B)[i·rB+k, j·cB+l] = A[i,j]·B[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Traces out one factor of a bipartite operator.
pub fn partial_trace(
    a: &HermitianMatrix,
    dims: BipartiteDims,
    which: Subsystem,
) -> Result<HermitianMatrix> {
    dims.check(a.dim())?;
    let (d1, d2) = (dims.first, dims.second);
    let m = a.matrix();
    let out = match which {
        Subsystem::Second => ComplexMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Subsystem::First => ComplexMatrix::from_fn(d2, d2, |k, l| {
            (0..d1).map(|i| m[(i * d2 + k, i * d2 + l)]).sum()
        }),
    };
    Ok(HermitianMatrix::symmetrized(out))
}

/// Transposes one factor of a bipartite operator.
pub fn partial_transpose(
    a: &HermitianMatrix,
    dims: BipartiteDims,
    which: Subsystem,
) -> Result<HermitianMatrix> {
    dims.check(a.dim())?;
    let d2 = dims.second;
    let m = a.matrix();
    let n = dims.total();
    let out = ComplexMatrix::from_fn(n, n, |r, c| {
        let (i, k) = (r / d2, r % d2);
        let (j, l) = (c / d2, c % d2);
        match which {
            Subsystem::First => m[(j * d2 + k, i * d2 + l)],
            Subsystem::Second => m[(i * d2 + l, j * d2 + k)],
        }
    });
    Ok(HermitianMatrix::symmetrized(out))
}

fn spectral_map(
    a: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    let (values, vectors) = a.eigh();
    if let Some(&min) = values.first() {
        if min < -TOL_PSD {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    let n = a.dim();
    let diag = DVector::from_iterator(n, values.iter().map(|&l| C64::new(f(l.max(0.0)), 0.0)));
    let m = &vectors * ComplexMatrix::from_diagonal(&diag) * vectors.adjoint();
    Ok(HermitianMatrix::symmetrized(m))
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    spectral_map(a, f64::sqrt)
}

/// Pseudo-inverse of the square root: inverts on the support, zero on the
/// kernel. Eigenvalues at or below `TOL_PSD` count as kernel.
pub fn psd_pinv_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    psd_pinv_sqrt_with_cutoff(a, TOL_PSD)
}

/// As [`psd_pinv_sqrt`] with an explicit support cutoff.
pub fn psd_pinv_sqrt_with_cutoff(a: &HermitianMatrix, cutoff: f64) -> Result<HermitianMatrix> {
    spectral_map(a, |l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 })
}

/// Schmidt decomposition `v = Σ_k c_k |l_k⟩⊗|r_k⟩`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Descending, nonnegative.
    pub coefficients: Vec<f64>,
    pub left: Vec<ComplexVector>,
    pub right: Vec<ComplexVector>,
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> ComplexVector {
        let n = self.left[0].len() * self.right[0].len();
        let mut v = ComplexVector::zeros(n);
        for ((c, l), r) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            v += l.kronecker(r) * C64::new(*c, 0.0);
        }
        v
    }
}

pub fn schmidt(v: &ComplexVector, dims: BipartiteDims) -> Result<SchmidtDecomposition> {
    dims.check(v.len())?;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("Schmidt input has norm {norm}, expected 1")));
    }
    let (d1, d2) = (dims.first, dims.second);
    let m = ComplexMatrix::from_fn(d1, d2, |i, j| v[i * d2 + j]);
    let svd = SVD::new(m, true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let coefficients = order.iter().map(|&k| svd.singular_values[k]).collect();
    let left = order.iter().map(|&k| u.column(k).into_owned()).collect();
    let right = order.iter().map(|&k| v_t.row(k).transpose()).collect();
    Ok(SchmidtDecomposition { coefficients, left, right })
}

/// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]`.
///
/// `A ⪰ 0` iff the embedding is PSD, and
/// `tr(embed(A)·embed(B)) = 2·tr(A·B)` for Hermitian `A`, `B`.
pub fn real_embed(a: &HermitianMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let m = a.matrix();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Recovers the Hermitian matrix from a (possibly unsymmetrized) embedding by
/// averaging the redundant blocks.
pub fn real_unembed(y: &DMatrix<f64>) -> Result<HermitianMatrix> {
    if y.nrows() != y.ncols() || !y.nrows().is_multiple_of(2) {
        return Err(Error::NotSquare { rows: y.nrows(), cols: y.ncols() });
    }
    let n = y.nrows() / 2;
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        C64::new(re, im)
    });
    HermitianMatrix::new(m)
}
