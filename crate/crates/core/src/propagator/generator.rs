//! Time-dependent Hamiltonians as linear maps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::ops::{ComplexOperator, ZERO};

/// A time-dependent Hermitian generator `H(t)`.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// Upper bound on the fastest angular frequency in the dynamics, rad/s.
    fn max_frequency(&self) -> f64;

    /// `out = H(t) x`.
    fn apply(&self, t: f64, x: &DVector<C64>, out: &mut DVector<C64>);

    /// Dense snapshot of `H(t)`.
    fn operator_at(&self, t: f64) -> ComplexOperator;

    /// `out = H(t) X` column by column.
    fn apply_to_columns(&self, t: f64, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let mut col = DVector::zeros(self.dim());
        let mut res = DVector::zeros(self.dim());
        for j in 0..x.ncols() {
            col.copy_from(&x.column(j));
            self.apply(t, &col, &mut res);
            out.set_column(j, &res);
        }
    }
}

/// Wraps a closure producing dense operators.
pub struct DenseHamiltonian<F> {
    dim: usize,
    max_frequency: f64,
    f: F,
}

impl<F> DenseHamiltonian<F>
where
    F: Fn(f64) -> ComplexOperator + Sync,
{
    pub fn new(dim: usize, max_frequency: f64, f: F) -> Self {
        Self { dim, max_frequency, f }
    }
}

impl<F> Generator for DenseHamiltonian<F>
where
    F: Fn(f64) -> ComplexOperator + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_frequency(&self) -> f64 {
        self.max_frequency
    }

    fn apply(&self, t: f64, x: &DVector<C64>, out: &mut DVector<C64>) {
        let h = (self.f)(t);
        out.gemv(C64::new(1.0, 0.0), h.matrix(), x, ZERO);
    }

    fn operator_at(&self, t: f64) -> ComplexOperator {
        (self.f)(t)
    }

    fn apply_to_columns(&self, t: f64, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let h = (self.f)(t);
        out.gemm(C64::new(1.0, 0.0), h.matrix(), x, ZERO);
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sparse matrices here are square");
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, vals }
    }

    pub fn from_operator(op: &ComplexOperator) -> Self {
        Self::from_dense(op.matrix())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_dense(&self.to_dense().adjoint())
    }

    /// `out = A x`.
    pub fn mul_vec(&self, x: &DVector<C64>, out: &mut DVector<C64>) {
        csr_mul_vec(self.n, &self.row_ptr, &self.col_idx, &self.vals, x.as_slice(), out.as_mut_slice());
    }

    /// `out = A X`.
    pub fn mul_mat(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        csr_mul_mat(self.n, &self.row_ptr, &self.col_idx, &self.vals, x, out);
    }
}

fn csr_mul_vec(n: usize, row_ptr: &[usize], col_idx: &[usize], vals: &[C64], x: &[C64], out: &mut [C64]) {
    for i in 0..n {
        let mut acc = ZERO;
        for k in row_ptr[i]..row_ptr[i + 1] {
            acc += vals[k] * x[col_idx[k]];
        }
        out[i] = acc;
    }
}

fn csr_mul_mat(
    n: usize,
    row_ptr: &[usize],
    col_idx: &[usize],
    vals: &[C64],
    x: &DMatrix<C64>,
    out: &mut DMatrix<C64>,
) {
    let m = x.ncols();
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for j in 0..m {
        let xc = &xs[j * n..(j + 1) * n];
        let oc = &mut os[j * n..(j + 1) * n];
        csr_mul_vec(n, row_ptr, col_idx, vals, xc, oc);
    }
}

/// `H(t) = Σ_ω e^{iωt} M_ω` stored on one shared sparsity pattern.
///
/// Frequencies come in ± pairs with `M_{-ω} = M_ω†`; each pair is summed
/// before accumulation so the assembled matrix is Hermitian to rounding.
#[derive(Clone, Debug)]
pub struct TermHamiltonian {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Static part on the shared pattern.
    static_vals: Vec<C64>,
    /// (ω > 0, values of M_ω, values of M_{-ω}).
    pairs: Vec<(f64, Vec<C64>, Vec<C64>)>,
    extra_frequency: f64,
    norm_bound: f64,
}

impl TermHamiltonian {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn values_at(&self, t: f64, vals: &mut [C64]) {
        vals.copy_from_slice(&self.static_vals);
        for (w, plus, minus) in &self.pairs {
            let p = C64::from_polar(1.0, w * t);
            let pc = p.conj();
            for k in 0..vals.len() {
                vals[k] += p * plus[k] + pc * minus[k];
            }
        }
    }

    /// Row-sum bound on `||H(t)||` valid at all times.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

impl Generator for TermHamiltonian {
    fn dim(&self) -> usize {
        self.n
    }

    fn max_frequency(&self) -> f64 {
        let top = self.pairs.iter().map(|p| p.0).fold(0.0, f64::max);
        top + self.norm_bound + self.extra_frequency
    }

    fn apply(&self, t: f64, x: &DVector<C64>, out: &mut DVector<C64>) {
        let mut vals = vec![ZERO; self.nnz()];
        self.values_at(t, &mut vals);
        csr_mul_vec(self.n, &self.row_ptr, &self.col_idx, &vals, x.as_slice(), out.as_mut_slice());
    }

    fn operator_at(&self, t: f64) -> ComplexOperator {
        let mut vals = vec![ZERO; self.nnz()];
        self.values_at(t, &mut vals);
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = vals[k];
            }
        }
        ComplexOperator::from_matrix(m).expect("square by construction")
    }

    fn apply_to_columns(&self, t: f64, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let mut vals = vec![ZERO; self.nnz()];
        self.values_at(t, &mut vals);
        csr_mul_mat(self.n, &self.row_ptr, &self.col_idx, &vals, x, out);
    }
}

/// Accumulates dense terms, then compresses them onto one pattern.
pub struct TermBuilder {
    n: usize,
    static_part: DMatrix<C64>,
    /// keyed by ω > 0
    pairs: Vec<(f64, DMatrix<C64>)>,
    extra_frequency: f64,
}

impl TermBuilder {
    pub fn new(dim: usize) -> Self {
        Self { n: dim, static_part: DMatrix::zeros(dim, dim), pairs: Vec::new(), extra_frequency: 0.0 }
    }

    /// Adds a Hermitian time-independent operator.
    pub fn add_static(&mut self, h: &ComplexOperator) -> &mut Self {
        assert_eq!(h.dim(), self.n);
        self.static_part += h.matrix();
        self
    }

    /// Adds `c e^{iωt} A + h.c.`.
    pub fn add_rotating(&mut self, coef: C64, omega: f64, a: &ComplexOperator) -> &mut Self {
        assert_eq!(a.dim(), self.n);
        if omega == 0.0 {
            let m = a.matrix() * coef;
            self.static_part += &m + m.adjoint();
            return self;
        }
        let (w, m) = if omega > 0.0 {
            (omega, a.matrix() * coef)
        } else {
            (-omega, (a.matrix() * coef).adjoint())
        };
        match self.pairs.iter_mut().find(|(f, _)| *f == w) {
            Some((_, acc)) => *acc += m,
            None => self.pairs.push((w, m)),
        }
        self
    }

    /// Frequencies not visible in the terms, such as a dropped `ν b†b`.
    pub fn extra_frequency(&mut self, w: f64) -> &mut Self {
        self.extra_frequency = w;
        self
    }

    pub fn build(&self) -> TermHamiltonian {
        let n = self.n;
        let mut pairs: Vec<(f64, DMatrix<C64>, DMatrix<C64>)> =
            self.pairs.iter().map(|(w, m)| (*w, m.clone(), m.adjoint())).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        let mut norm_bound: f64 = 0.0;
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let mut used = self.static_part[(i, j)] != ZERO;
                row_sum += self.static_part[(i, j)].norm();
                for (_, p, m) in &pairs {
                    used |= p[(i, j)] != ZERO || m[(i, j)] != ZERO;
                    row_sum += p[(i, j)].norm() + m[(i, j)].norm();
                }
                if used {
                    col_idx.push(j);
                }
            }
            norm_bound = norm_bound.max(row_sum);
            row_ptr.push(col_idx.len());
        }
        let gather = |m: &DMatrix<C64>| -> Vec<C64> {
            let mut v = Vec::with_capacity(col_idx.len());
            for i in 0..n {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    v.push(m[(i, col_idx[k])]);
                }
            }
            v
        };
        let static_vals = gather(&self.static_part);
        let pair_vals = pairs.iter().map(|(w, p, m)| (*w, gather(p), gather(m))).collect();
        TermHamiltonian {
            n,
            row_ptr: row_ptr.clone(),
            col_idx: col_idx.clone(),
            static_vals,
            pairs: pair_vals,
            extra_frequency: self.extra_frequency,
            norm_bound,
        }
    }
}
