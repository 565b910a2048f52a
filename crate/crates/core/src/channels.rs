//! Choi operators of the parameter-encoding channels.
//!
//! Tensor ordering is input ⊗ output everywhere:
//! `C = Σ_ij |i⟩⟨j| ⊗ E[|i⟩⟨j|]`, so the output factor is traced out with
//! [`Subsystem::Second`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs, partial_trace, BipartiteDims, ComplexMatrix, HermitianMatrix, Subsystem, C64, TOL_PSD,
};

/// The factor of a Choi operator that carries the channel input.
pub const INPUT_FACTOR: Subsystem = Subsystem::First;
/// The factor of a Choi operator that carries the channel output.
pub const OUTPUT_FACTOR: Subsystem = Subsystem::Second;

const TOL_TRACE_PRESERVING: f64 = 1e-9;
const TOL_UNITARY: f64 = 1e-9;
const SU2_SERIES_THRESHOLD: f64 = 1e-8;

/// Choi operator of a completely positive trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    matrix: HermitianMatrix,
    d_in: usize,
    d_out: usize,
}

impl ChoiOperator {
    pub fn new(matrix: HermitianMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if matrix.dim() != d_in * d_out {
            return Err(Error::DimensionMismatch { expected: d_in * d_out, found: matrix.dim() });
        }
        let min = matrix.min_eigenvalue();
        if min < -TOL_PSD {
            return Err(Error::InvalidChannel(format!("Choi operator not PSD (min eigenvalue {min:e})")));
        }
        let marginal = partial_trace(&matrix, BipartiteDims::new(d_in, d_out), OUTPUT_FACTOR)?;
        let deviation = marginal.max_abs_diff(&HermitianMatrix::identity(d_in));
        if deviation > TOL_TRACE_PRESERVING {
            return Err(Error::InvalidChannel(format!(
                "channel not trace preserving (|tr_out C - 1| = {deviation:e})"
            )));
        }
        Ok(Self { matrix, d_in, d_out })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
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
}

/// Choi operator of `ρ ↦ U ρ U†`, i.e. `|φ_U⟩⟨φ_U|` with `|φ_U⟩ = Σ_i |i⟩⊗U|i⟩`.
pub fn choi_of_unitary(u: &ComplexMatrix) -> Result<ChoiOperator> {
    if u.nrows() != u.ncols() {
        return Err(Error::NotSquare { rows: u.nrows(), cols: u.ncols() });
    }
    let d = u.nrows();
    let deviation = max_abs(&(u.adjoint() * u - ComplexMatrix::identity(d, d)));
    if deviation > TOL_UNITARY {
        return Err(Error::NotUnitary { deviation });
    }
    let phi = crate::linalg::ComplexVector::from_fn(d * d, |r, _| u[(r % d, r / d)]);
    ChoiOperator::new(HermitianMatrix::projector(&phi), d, d)
}

/// Phase unitary `exp(-iθ S_z)` with `S_z = Σ_k k|k⟩⟨k|` on a `d`-level system.
pub fn phase_unitary(d: usize, theta: f64) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        u[(k, k)] = C64::from_polar(1.0, -(k as f64) * theta);
    }
    u
}

pub fn phase_channel(d: usize, theta: f64) -> Result<ChoiOperator> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("phase channel needs d >= 2, got {d}")));
    }
    choi_of_unitary(&phase_unitary(d, theta))
}

/// Bath particle statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

/// Mean occupation of a bath mode of energy `epsilon` at temperature `theta`.
pub fn occupation(theta: f64, epsilon: f64, statistics: Statistics) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {theta}")));
    }
    let x = epsilon / theta;
    Ok(match statistics {
        Statistics::Bosonic => 1.0 / x.exp_m1(),
        Statistics::Fermionic => 1.0 / (x.exp() + 1.0),
    })
}

/// Qubit probe coupled to a thermal bath for time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalChannelParams {
    /// Probe energy gap.
    pub epsilon: f64,
    /// Spectral density of the bath at `epsilon`.
    pub coupling: f64,
    pub statistics: Statistics,
    pub time: f64,
    /// Keep the temperature-independent Hamiltonian phase on the coherences.
    #[serde(default)]
    pub keep_hamiltonian_phase: bool,
}

impl ThermalChannelParams {
    pub fn new(epsilon: f64, coupling: f64, statistics: Statistics, time: f64) -> Self {
        Self { epsilon, coupling, statistics, time, keep_hamiltonian_phase: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling must be positive, got {}", self.coupling)));
        }
        if !(self.time >= 0.0) || !self.time.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be nonnegative, got {}", self.time)));
        }
        Ok(())
    }

    /// Absorption and emission rates `(Γ_in, Γ_out)` at temperature `theta`.
    pub fn rates(&self, theta: f64) -> Result<(f64, f64)> {
        let n = occupation(theta, self.epsilon, self.statistics)?;
        let gamma_out = match self.statistics {
            Statistics::Bosonic => self.coupling * (1.0 + n),
            Statistics::Fermionic => self.coupling * (1.0 - n),
        };
        Ok((self.coupling * n, gamma_out))
    }
}

/// Choi operator of the thermalization channel generated by
/// `dρ/dt = -i[ε|1⟩⟨1|, ρ] + Γ_in D[σ+]ρ + Γ_out D[σ-]ρ`.
pub fn thermal_channel(params: &ThermalChannelParams, theta: f64) -> Result<ChoiOperator> {
    params.validate()?;
    let (gamma_in, gamma_out) = params.rates(theta)?;
    let gamma = gamma_in + gamma_out;
    let t = params.time;
    let decay = (-gamma * t).exp();
    // steady-state excited population
    let excited = gamma_in / gamma;
    let relaxed = 1.0 - decay;

    let coherence = if params.keep_hamiltonian_phase {
        C64::from_polar((-0.5 * gamma * t).exp(), params.epsilon * t)
    } else {
        C64::new((-0.5 * gamma * t).exp(), 0.0)
    };

    // index (input, output) -> 2 * input + output
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0 - excited * relaxed, 0.0);
    m[(1, 1)] = C64::new(excited * relaxed, 0.0);
    m[(2, 2)] = C64::new((1.0 - excited) * relaxed, 0.0);
    m[(3, 3)] = C64::new(decay + excited * relaxed, 0.0);
    m[(0, 3)] = coherence;
    m[(3, 0)] = coherence.conj();
    ChoiOperator::new(HermitianMatrix::new(m)?, 2, 2)
}

/// `exp(-i θ·σ)` in closed form.
pub fn su2_unitary(theta: &[f64; 3]) -> ComplexMatrix {
    let norm = (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]).sqrt();
    let sinc = if norm < SU2_SERIES_THRESHOLD { 1.0 } else { norm.sin() / norm };
    let (a, b, c) = (theta[0] * sinc, theta[1] * sinc, theta[2] * sinc);
    let cos = norm.cos();
    // cos|θ| I - i sin|θ| n·σ
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[C64::new(cos, -c), C64::new(-b, -a), C64::new(b, -a), C64::new(cos, c)],
    )
}

pub fn su2_channel(theta: &[f64; 3]) -> Result<ChoiOperator> {
    choi_of_unitary(&su2_unitary(theta))
}

/// A parametrized channel family together with its dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelFamily {
    Phase { dim: usize },
    Thermal(ThermalChannelParams),
    Su2,
}

impl ChannelFamily {
    pub fn d_in(&self) -> usize {
        match self {
            ChannelFamily::Phase { dim } => *dim,
            ChannelFamily::Thermal(_) | ChannelFamily::Su2 => 2,
        }
    }

    pub fn d_out(&self) -> usize {
        self.d_in()
    }

    /// Number of components of a parameter vector.
    pub fn n_params(&self) -> usize {
        match self {
            ChannelFamily::Su2 => 3,
            _ => 1,
        }
    }

    pub fn choi(&self, theta: &[f64]) -> Result<ChoiOperator> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: theta.len() });
        }
        match self {
            ChannelFamily::Phase { dim } => phase_channel(*dim, theta[0]),
            ChannelFamily::Thermal(params) => thermal_channel(params, theta[0]),
            ChannelFamily::Su2 => su2_channel(&[theta[0], theta[1], theta[2]]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, ComplexVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{LN_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn identity_choi(d: usize) -> HermitianMatrix {
        let mut v = ComplexVector::zeros(d * d);
        for i in 0..d {
            v[i * d + i] = c(1.0, 0.0);
        }
        HermitianMatrix::projector(&v)
    }

    #[test]
    fn identity_unitary_choi() {
        let choi = choi_of_unitary(&ComplexMatrix::identity(2, 2)).unwrap();
        assert!(choi.matrix().max_abs_diff(&identity_choi(2)) < 1e-15);
        assert!((choi.matrix().trace() - 2.0).abs() < 1e-15);
        assert_eq!(choi.matrix().rank(1e-9), 1);
    }

    #[test]
    fn diagonal_phase_choi_entry() {
        let phi = 0.7;
        let u = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, phi)]);
        let choi = choi_of_unitary(&u).unwrap();
        // ⟨00|C|11⟩ = ⟨0|U|0⟩ conj(⟨1|U|1⟩)
        assert!((choi.matrix().matrix()[(0, 3)] - C64::from_polar(1.0, -phi)).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = ComplexMatrix::identity(2, 2) * c(2.0, 0.0);
        assert!(matches!(choi_of_unitary(&m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn random_unitary_choi_is_trace_preserving_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let theta = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            let choi = su2_channel(&theta).unwrap();
            let ev = choi.matrix().eigenvalues();
            assert!((ev[3] - 2.0).abs() < 1e-12);
            assert!(ev[..3].iter().all(|l| l.abs() < 1e-12));
        }
    }

    #[test]
    fn phase_channel_special_angles() {
        let id = identity_choi(3);
        assert!(phase_channel(3, 0.0).unwrap().matrix().max_abs_diff(&id) < 1e-15);
        assert!(phase_channel(3, 2.0 * PI).unwrap().matrix().max_abs_diff(&id) < 1e-12);
        let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]));
        let expected = choi_of_unitary(&diag).unwrap();
        assert!(phase_channel(3, PI).unwrap().matrix().max_abs_diff(expected.matrix()) < 1e-12);
        assert!(phase_channel(1, 0.0).is_err());
    }

    #[test]
    fn occupation_values() {
        assert!((occupation(1.0 / LN_2, 1.0, Statistics::Bosonic).unwrap() - 1.0).abs() < 1e-14);
        assert!((occupation(1e12, 1.0, Statistics::Fermionic).unwrap() - 0.5).abs() < 1e-11);
        let expected = 1.0 / (std::f64::consts::E - 1.0);
        assert!((occupation(0.1, 0.1, Statistics::Bosonic).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.581977).abs() < 1e-6);
        assert!(occupation(0.0, 0.1, Statistics::Bosonic).is_err());
        assert!(occupation(-1.0, 0.1, Statistics::Fermionic).is_err());
        let nf = occupation(0.3, 0.1, Statistics::Fermionic).unwrap();
        assert!(nf > 0.0 && nf < 0.5);
    }

    #[test]
    fn thermal_channel_at_zero_time_is_identity() {
        for statistics in [Statistics::Bosonic, Statistics::Fermionic] {
            let params = ThermalChannelParams::new(0.1, 2.0, statistics, 0.0);
            let choi = thermal_channel(&params, 0.7).unwrap();
            assert!(choi.matrix().max_abs_diff(&identity_choi(2)) < 1e-15);
        }
    }

    #[test]
    fn thermal_channel_long_time_is_gibbs() {
        let theta = 0.5;
        let n = occupation(theta, 0.1, Statistics::Bosonic).unwrap();
        let gamma = 2.0 * (2.0 * n + 1.0);
        let params = ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 1e3 / gamma);
        let choi = thermal_channel(&params, theta).unwrap();
        let out = partial_trace(choi.matrix(), choi.dims(), INPUT_FACTOR).unwrap();
        let gibbs = HermitianMatrix::from_real_diagonal(&[(n + 1.0) / (2.0 * n + 1.0), n / (2.0 * n + 1.0)]);
        assert!(out.max_abs_diff(&gibbs.scale(2.0)) < 1e-12);
        assert!(choi.matrix().matrix()[(0, 3)].norm() < 1e-12);
    }

    #[test]
    fn thermal_channel_rejects_bad_params() {
        let good = ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 0.1);
        assert!(thermal_channel(&good, -1.0).is_err());
        assert!(thermal_channel(&ThermalChannelParams { coupling: 0.0, ..good }, 1.0).is_err());
        assert!(thermal_channel(&ThermalChannelParams { time: -0.1, ..good }, 1.0).is_err());
        assert!(thermal_channel(&ThermalChannelParams { epsilon: 0.0, ..good }, 1.0).is_err());
    }

    // Integrates the master equation with RK4 for each basis input |i⟩⟨j| and
    // assembles the Choi operator directly.
    fn integrated_thermal_choi(params: &ThermalChannelParams, theta: f64, steps: usize) -> ComplexMatrix {
        let (gin, gout) = params.rates(theta).unwrap();
        let eps = params.epsilon;
        let sp = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let sm = sp.adjoint();
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(eps, 0.0)]);
        let dissipator = |a: &ComplexMatrix, rho: &ComplexMatrix| {
            let ada = a.adjoint() * a;
            a * rho * a.adjoint() - (&ada * rho + rho * &ada) * c(0.5, 0.0)
        };
        let rhs = |rho: &ComplexMatrix| {
            (&h * rho - rho * &h) * c(0.0, -1.0) + dissipator(&sp, rho) * c(gin, 0.0) + dissipator(&sm, rho) * c(gout, 0.0)
        };
        let dt = params.time / steps as f64;
        let mut choi = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut rho = ComplexMatrix::zeros(2, 2);
                rho[(i, j)] = c(1.0, 0.0);
                for _ in 0..steps {
                    let k1 = rhs(&rho);
                    let k2 = rhs(&(&rho + &k1 * c(dt / 2.0, 0.0)));
                    let k3 = rhs(&(&rho + &k2 * c(dt / 2.0, 0.0)));
                    let k4 = rhs(&(&rho + &k3 * c(dt, 0.0)));
                    rho += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
                }
                let mut eij = ComplexMatrix::zeros(2, 2);
                eij[(i, j)] = c(1.0, 0.0);
                choi += kron(&eij, &rho);
            }
        }
        choi
    }

    #[test]
    fn thermal_channel_matches_integrated_master_equation() {
        for statistics in [Statistics::Bosonic, Statistics::Fermionic] {
            let params = ThermalChannelParams {
                keep_hamiltonian_phase: true,
                ..ThermalChannelParams::new(0.1, 2.0, statistics, 0.05)
            };
            let exact = integrated_thermal_choi(&params, 1.0, 4000);
            let closed = thermal_channel(&params, 1.0).unwrap();
            assert!(max_abs(&(closed.matrix().matrix() - &exact)) < 1e-10, "{statistics:?}");
        }
        // entry (1,1) = ⟨1|E(|0⟩⟨0|)|1⟩ for the bosonic bath, written out
        let n = occupation(1.0, 0.1, Statistics::Bosonic).unwrap();
        let gamma = 2.0 * (2.0 * n + 1.0);
        let expected = (n - n * (-gamma * 0.05).exp()) / (2.0 * n + 1.0);
        let params = ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 0.05);
        let choi = thermal_channel(&params, 1.0).unwrap();
        assert!((choi.matrix().matrix()[(1, 1)].re - expected).abs() < 1e-14);
    }

    #[test]
    fn dropping_the_hamiltonian_phase_only_touches_coherences() {
        let base = ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 0.3);
        let with = thermal_channel(&ThermalChannelParams { keep_hamiltonian_phase: true, ..base }, 0.8).unwrap();
        let without = thermal_channel(&base, 0.8).unwrap();
        let (a, b) = (with.matrix().matrix(), without.matrix().matrix());
        for k in 0..4 {
            assert_eq!(a[(k, k)], b[(k, k)]);
        }
        assert!((a[(0, 3)].norm() - b[(0, 3)].norm()).abs() < 1e-15);
        assert!(b[(0, 3)].im == 0.0);
    }

    #[test]
    fn thermal_channel_is_continuous_in_time() {
        let params = ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 0.2);
        let a = thermal_channel(&params, 1.3).unwrap();
        let b = thermal_channel(&ThermalChannelParams { time: 0.2 + 1e-6, ..params }, 1.3).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-4);
    }

    fn expm_hermitian_generator(theta: &[f64; 3]) -> ComplexMatrix {
        // exp(-i H) via eigendecomposition of H = θ·σ
        let h = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(theta[2], 0.0), c(theta[0], -theta[1]), c(theta[0], theta[1]), c(-theta[2], 0.0)],
        );
        let (values, vectors) = HermitianMatrix::new(h).unwrap().eigh();
        let d = ComplexVector::from_iterator(2, values.iter().map(|&l| C64::from_polar(1.0, -l)));
        &vectors * ComplexMatrix::from_diagonal(&d) * vectors.adjoint()
    }

    #[test]
    fn su2_closed_form_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let theta = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            assert!(max_abs(&(su2_unitary(&theta) - expm_hermitian_generator(&theta))) < 1e-10);
        }
        assert!(max_abs(&(su2_unitary(&[1e-10, 0.0, -2e-10]) - expm_hermitian_generator(&[1e-10, 0.0, -2e-10]))) < 1e-15);
    }

    #[test]
    fn su2_special_angles() {
        let zero = su2_channel(&[0.0, 0.0, 0.0]).unwrap();
        assert!(zero.matrix().max_abs_diff(&identity_choi(2)) < 1e-15);
        let z = su2_channel(&[0.0, 0.0, PI / 2.0]).unwrap();
        let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![
            C64::from_polar(1.0, -PI / 2.0),
            C64::from_polar(1.0, PI / 2.0),
        ]));
        assert!(z.matrix().max_abs_diff(choi_of_unitary(&diag).unwrap().matrix()) < 1e-14);
    }

    #[test]
    fn unitary_choi_overlap_is_trace_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            let b = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            let lhs = su2_channel(&a).unwrap().matrix().inner(su2_channel(&b).unwrap().matrix()) / 4.0;
            let rhs = (su2_unitary(&a).adjoint() * su2_unitary(&b)).trace().norm_sqr() / 4.0;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn family_dispatch() {
        let fam = ChannelFamily::Su2;
        assert_eq!(fam.n_params(), 3);
        assert!(fam.choi(&[0.1]).is_err());
        let thermal = ChannelFamily::Thermal(ThermalChannelParams::new(0.1, 2.0, Statistics::Bosonic, 0.05));
        assert_eq!(thermal.d_in(), 2);
        assert!(thermal.choi(&[1.0]).is_ok());
        assert_eq!(ChannelFamily::Phase { dim: 3 }.d_out(), 3);
    }
}
