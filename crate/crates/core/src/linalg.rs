//! Dense complex matrix helpers.
//!
//! Everything here is a pure function on owned `nalgebra` matrices. The
//! structured operators used by the compression machinery (identity `I_n`,
//! all-ones `J_n`, direct sums, Kronecker products and the canonical shuffle)
//! live here so that the higher modules never index tensor factors by hand.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type RealMatrix = DMatrix<f64>;

/// Hermiticity check threshold used when validating inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Numerical slack used by positivity and residual checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Minimum-eigenvalue slack, scaled by `1 + ||A||`.
    pub psd_eps: f64,
    /// Residual-norm slack for affine constraints.
    pub affine_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            psd_eps: 1e-9,
            affine_eps: 1e-8,
        }
    }
}

impl Tolerance {
    /// Scale-aware eigenvalue slack for a matrix with spectral norm `norm`.
    pub fn psd_slack(&self, norm: f64) -> f64 {
        self.psd_eps * (1.0 + norm)
    }
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// `J_n`, the matrix with every entry equal to one.
pub fn ones(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_element(n, n, c(1.0))
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

pub fn diag(entries: &[f64]) -> ComplexMatrix {
    let n = entries.len();
    let mut m = zeros(n, n);
    for (i, &v) in entries.iter().enumerate() {
        m[(i, i)] = c(v);
    }
    m
}

/// Row-major real entries into a complex matrix.
pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count mismatch");
    ComplexMatrix::from_fn(rows, cols, |i, j| c(entries[i * cols + j]))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right. Empty list gives `[[1]]`.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors.iter().fold(identity(1), |acc, f| kron(&acc, f))
}

pub fn direct_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    ensure_square(b)?;
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    Ok(out)
}

/// The permutation-conjugation realizing `A ⊗ B ↦ B ⊗ A` for `A ∈ M_n`, `B ∈ M_m`.
pub fn canonical_shuffle(x: &ComplexMatrix, n: usize, m: usize) -> Result<ComplexMatrix> {
    let size = n * m;
    if x.nrows() != size || x.ncols() != size {
        return Err(Error::DimensionMismatch(format!(
            "shuffle expects {size}x{size}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    // index i1*m + i2  ->  i2*n + i1
    let perm = |i: usize| (i % m) * n + i / m;
    let mut out = zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            out[(perm(i), perm(j))] = x[(i, j)];
        }
    }
    Ok(out)
}

/// The `4n × 4n` permutation exchanging columns `j` and `j + 2n` for `j = 2, 4, …, 2n`
/// (one-based).
pub fn column_swap_permutation(n: usize) -> ComplexMatrix {
    let size = 4 * n;
    let mut target: Vec<usize> = (0..size).collect();
    for j in (2..=2 * n).step_by(2) {
        target.swap(j - 1, j - 1 + 2 * n);
    }
    let mut w = zeros(size, size);
    for (col, &row) in target.iter().enumerate() {
        w[(row, col)] = c(1.0);
    }
    w
}

/// `a^* x a`.
pub fn congruence(x: &ComplexMatrix, a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint() * x * a
}

pub fn ensure_square(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

pub fn hermitian_deviation(a: &ComplexMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(a: &ComplexMatrix) -> bool {
    a.nrows() == a.ncols() && hermitian_deviation(a) <= HERMITIAN_TOL * (1.0 + max_abs(a))
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn ensure_hermitian(a: &ComplexMatrix) -> Result<()> {
    ensure_square(a)?;
    if !is_hermitian(a) {
        return Err(Error::NotHermitian {
            deviation: hermitian_deviation(a),
        });
    }
    Ok(())
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
/// Eigenvectors are the columns of the returned matrix, in the same order.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    ensure_hermitian(a)?;
    Ok(hermitian_eigen_unchecked(a))
}

pub(crate) fn hermitian_eigen_unchecked(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let sym = (a + a.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eigen(a).map(|(v, _)| v)
}

pub(crate) fn eigenvalues_unchecked(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.adjoint()) * c(0.5);
    // real symmetric input is common and much cheaper in real arithmetic
    let mut v: Vec<f64> = if sym.iter().all(|z| z.im == 0.0) {
        sym.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        sym.symmetric_eigenvalues().iter().copied().collect()
    };
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    ensure_hermitian(a)?;
    Ok(eigenvalues_unchecked(a).first().copied().unwrap_or(0.0))
}

/// Minimum eigenvalue together with the spectral norm, for scale-aware checks.
pub(crate) fn spectrum_bounds(a: &ComplexMatrix) -> (f64, f64) {
    let ev = eigenvalues_unchecked(a);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (lo, lo.abs().max(hi.abs())),
        _ => (0.0, 0.0),
    }
}

pub fn is_psd(a: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    ensure_hermitian(a)?;
    Ok(is_psd_unchecked(a, tol))
}

pub(crate) fn is_psd_unchecked(a: &ComplexMatrix, tol: &Tolerance) -> bool {
    let (lo, norm) = spectrum_bounds(a);
    lo >= -tol.psd_slack(norm)
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped to zero).
pub fn psd_projection(a: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen_unchecked(a);
    let n = a.nrows();
    let mut out = zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(k);
            out += (&v * v.adjoint()) * c(lambda);
        }
    }
    out
}

/// Exact rank of an integer matrix (rows of equal length), by fraction-free elimination.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .filter(|r| r.iter().any(|&v| v != 0))
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    if m.is_empty() {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in rank + 1..m.len() {
            for c2 in col + 1..cols {
                let v = &m[rank][col] * &m[r][c2] - &m[r][col] * &m[rank][c2];
                m[r][c2] = v / &prev;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Numerical rank by singular values relative to the largest one.
pub fn numeric_rank(m: &RealMatrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Least-squares solution of `a x = b` for `a` with full column rank, via QR.
pub fn least_squares(a: &RealMatrix, b: &[f64]) -> Option<Vec<f64>> {
    if a.nrows() < a.ncols() || b.len() != a.nrows() {
        return None;
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rhs = q.transpose() * nalgebra::DVector::from_column_slice(b);
    let x = r.solve_upper_triangular(&rhs)?;
    Some(x.iter().copied().collect())
}

/// Orthonormal basis (as columns) of the span of the given real vectors.
pub fn orthonormal_span(vectors: &[Vec<f64>], dim: usize, rel_tol: f64) -> RealMatrix {
    if vectors.is_empty() {
        return RealMatrix::zeros(dim, 0);
    }
    let m = RealMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > rel_tol * top)
        .collect();
    RealMatrix::from_fn(dim, keep.len(), |i, j| u[(i, keep[j])])
}
