//! Dense complex operators and states over small composite Hilbert spaces,
//! plus the fidelity metrics shared by every experiment.
//!
//! Composite spaces follow the Kronecker convention with the left factor
//! outermost, so the two-ion space is `ion1 ⊗ ion2 ⊗ phonon`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default merit returned for a perfect fidelity.
pub const MERIT_FLOOR: f64 = -16.0;

/// Relative Frobenius tolerance for Hamiltonian hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexOperator {
    m: DMatrix<C64>,
}

impl ComplexOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        Ok(Self { m })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { m: DMatrix::from_fn(dim, dim, f) }
    }

    /// Row-major real diagonal.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    /// `|i><j|` in a `dim`-dimensional space.
    pub fn ket_bra(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = ONE;
        Self { m }
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &PureState, b: &PureState) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        Ok(Self { m: &a.v * b.v.adjoint() })
    }

    /// Phonon annihilation operator truncated to `fock_dim` levels.
    pub fn destroy(fock_dim: usize) -> Self {
        Self::from_fn(fock_dim, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Number operator `b†b` truncated to `fock_dim` levels.
    pub fn number(fock_dim: usize) -> Self {
        let n: Vec<f64> = (0..fock_dim).map(|k| k as f64).collect();
        Self::diagonal(&n)
    }

    /// `a + a†`. Exactly Hermitian in floating point.
    pub fn plus_adjoint(a: &Self) -> Self {
        Self { m: &a.m + a.m.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { m: &self.m * c }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m - &other.m })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m * &other.m })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m * &other.m - &other.m * &self.m })
    }

    pub fn apply(&self, psi: &PureState) -> Result<DVector<C64>> {
        check_dim(self.dim(), psi.dim())?;
        Ok(&self.m * &psi.v)
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||A - A†||_F / ||A||_F`, zero for the zero operator.
    pub fn hermiticity_defect(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let d = &self.m - self.m.adjoint();
        d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / norm
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_defect() <= rel_tol
    }

    /// `||U†U - 1||_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.m.adjoint() * &self.m - DMatrix::<C64>::identity(self.dim(), self.dim());
        d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Matrix exponential.
    pub fn expm(&self) -> Self {
        Self { m: self.m.clone().exp() }
    }

    /// `exp(-i H t)` for Hermitian `H`, via eigendecomposition so the result
    /// is unitary to rounding.
    pub fn hermitian_propagator(&self, t: f64) -> Self {
        let eig = SymmetricEigen::new(self.m.clone());
        let phases = DVector::from_iterator(
            self.dim(),
            eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)),
        );
        let v = &eig.eigenvectors;
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| v[(i, j)] * phases[j]);
        Self { m: scaled * v.adjoint() }
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.m.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Expectation `<ψ|A|ψ>`.
    pub fn expectation(&self, psi: &PureState) -> Result<C64> {
        check_dim(self.dim(), psi.dim())?;
        Ok(psi.v.dotc(&(&self.m * &psi.v)))
    }

    /// `V† A V`.
    pub fn conjugate_by(&self, v: &Self) -> Result<Self> {
        check_dim(self.dim(), v.dim())?;
        Ok(Self { m: v.m.adjoint() * &self.m * &v.m })
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.m.clone();
        let mut acc = DMatrix::identity(self.dim(), self.dim());
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        Self { m: acc }
    }
}

/// Kronecker product with `a`'s index outermost.
pub fn tensor_product(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    ComplexOperator { m: a.m.kronecker(&b.m) }
}

/// Kronecker product of a list of operators, left to right.
pub fn tensor_all(ops: &[&ComplexOperator]) -> ComplexOperator {
    let mut it = ops.iter();
    let first = it.next().expect("tensor_all needs at least one operator");
    it.fold((*first).clone(), |acc, op| tensor_product(&acc, op))
}

/// A normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    v: DVector<C64>,
}

impl PureState {
    pub const NORM_TOL: f64 = 1e-10;

    /// Wraps amplitudes that must already be normalized.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { v: amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { v: amplitudes / C64::new(norm, 0.0) })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(DVector::from_column_slice(amplitudes))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self { v }
    }

    /// For integrator output whose norm is monitored separately.
    pub(crate) fn from_raw(v: DVector<C64>) -> Self {
        Self { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.v[i]
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.v.dotc(&other.v))
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { v: self.v.kronecker(&other.v) }
    }

    pub fn projector(&self) -> MixedState {
        MixedState { m: &self.v * self.v.adjoint() }
    }
}

/// A density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    m: DMatrix<C64>,
}

impl MixedState {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    /// Validates hermiticity, unit trace and positivity.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let s = Self { m };
        let herm = (&s.m - s.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = s.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let min_ev = s.min_eigenvalue();
        if min_ev < -Self::POSITIVITY_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(s)
    }

    /// Skips validation; used for integrator output that is checked in bulk.
    pub(crate) fn from_raw(m: DMatrix<C64>) -> Self {
        Self { m }
    }

    pub fn pure(psi: &PureState) -> Self {
        psi.projector()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // Symmetrize so the eigensolver sees an exactly Hermitian input.
        let h = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }
}

/// `F = sqrt(<ψ|ρ|ψ>)`, clamped to [0, 1].
pub fn state_fidelity(target: &PureState, rho: &MixedState) -> Result<f64> {
    Ok(overlap_probability(target, rho)?.sqrt())
}

/// `<ψ|ρ|ψ>` (the squared fidelity), clamped to [0, 1].
pub fn overlap_probability(target: &PureState, rho: &MixedState) -> Result<f64> {
    check_dim(target.dim(), rho.dim())?;
    let p = target.v.dotc(&(&rho.m * &target.v)).re;
    Ok(p.clamp(0.0, 1.0))
}

/// `M = log10(1 - F²)` with the default floor.
pub fn merit(f: f64) -> Result<f64> {
    merit_with_floor(f, MERIT_FLOOR)
}

pub fn merit_with_floor(f: f64, floor: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange { name: "fidelity", value: f, range: "[0, 1]" });
    }
    Ok(merit_from_squared(f * f, floor))
}

/// Merit from an already-squared fidelity, avoiding a sqrt round trip.
pub fn merit_from_squared(f2: f64, floor: f64) -> f64 {
    let infidelity = 1.0 - f2.clamp(0.0, 1.0);
    if infidelity <= 0.0 {
        return floor;
    }
    infidelity.log10().max(floor)
}

/// Traces out the trailing phonon factor of a `qubit ⊗ phonon` state.
pub fn partial_trace_phonon(rho: &MixedState, qubit_dim: usize, fock_dim: usize) -> Result<MixedState> {
    let dim = qubit_dim * fock_dim;
    if rho.dim() != dim || qubit_dim == 0 {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    let m = DMatrix::from_fn(qubit_dim, qubit_dim, |a, b| {
        (0..fock_dim).map(|n| rho.m[(a * fock_dim + n, b * fock_dim + n)]).sum()
    });
    Ok(MixedState { m })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Complex number helper for literal-heavy code.
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Plain serializable complex value for reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexValue {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}
