//! Sparse matrices, the factorization of the flow matrix and the
//! Schur-complement solver of the constrained flow step.
//!
//! The saddle system
//!
//! ```text
//! [ A   B^T ] [dY]   [F]
//! [ B   0   ] [L ] = [0]
//! ```
//!
//! is solved by CG on `S = B A^{-1} B^T` with right-hand side
//! `B A^{-1} F`, followed by `A dY = F - B^T L`. The flow matrix is
//! block diagonal with three identical scalar blocks, so one scalar
//! factorization serves every component.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};
use log::warn;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are
    /// summed in a fixed order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn from_dense(nrows: usize, ncols: usize, a: &[f64]) -> Self {
        let mut t = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                if a[i * ncols + j] != 0.0 {
                    t.push((i, j, a[i * ncols + j]));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, val) = self.row(r);
        idx.binary_search(&c).map_or(0.0, |k| val[k])
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (idx, val) = self.row(r);
            *yr = idx.iter().zip(val).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    /// `y = A^T x`
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                y[c] += v * xr;
            }
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.mul_transpose_vec(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|r| {
                let (idx, val) = self.row(r);
                x[r] * idx.iter().zip(val).map(|(&c, &v)| v * y[c]).sum::<f64>()
            })
            .sum()
    }

    /// `alpha A + beta B` for matrices of the same shape.
    pub fn linear_combination(alpha: f64, a: &Self, beta: f64, b: &Self) -> Self {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let mut t = Vec::with_capacity(a.nnz() + b.nnz());
        for (s, m) in [(alpha, a), (beta, b)] {
            for r in 0..m.nrows {
                let (idx, val) = m.row(r);
                t.extend(idx.iter().zip(val).map(|(&c, &v)| (r, c, s * v)));
            }
        }
        Self::from_triplets(a.nrows, a.ncols, t)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                m = m.max((v - self.get(c, r)).abs());
            }
        }
        m
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                d[r * self.ncols + c] = v;
            }
        }
        d
    }

    /// Column-compressed copy of the transpose; for symmetric matrices this is
    /// the matrix itself.
    fn transpose_to_faer(&self) -> SparseColMat<usize, f64> {
        let sym = SymbolicSparseColMat::new_checked(
            self.ncols,
            self.nrows,
            self.indptr.clone(),
            None,
            self.indices.clone(),
        );
        SparseColMat::new(sym, self.values.clone())
    }
}

enum Factor {
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(Box<faer::sparse::linalg::solvers::Lu<usize, f64>>),
}

/// Direct factorization of a sparse symmetric matrix.
pub struct Factorization {
    n: usize,
    factor: Factor,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.n)
            .field("kind", &self.kind())
            .finish()
    }
}

/// Residual bound accepted right after factorization.
const FACTOR_CHECK_TOL: f64 = 1e-8;

impl Factorization {
    /// Sparse Cholesky; falls back to sparse LU when a pivot is not positive.
    /// A numerically singular matrix yields [`Error::IllPosed`].
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidParameter(format!(
                "cannot factorize a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let m = a.transpose_to_faer();
        let factor = match m.sp_cholesky(Side::Lower) {
            Ok(llt) => Factor::Cholesky(llt),
            Err(_) => {
                warn!("sparse Cholesky failed, retrying with LU");
                let lu = m
                    .sp_lu()
                    .map_err(|e| Error::IllPosed(format!("sparse LU failed: {e:?}")))?;
                Factor::Lu(Box::new(lu))
            }
        };
        let f = Self { n, factor };
        f.check(a)?;
        Ok(f)
    }

    fn check(&self, a: &CsrMatrix) -> Result<()> {
        if self.n == 0 {
            return Ok(());
        }
        let b: Vec<f64> = (0..self.n)
            .map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0)
            .collect();
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        let r = a.apply(&x);
        let res = r
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !x.iter().all(|v| v.is_finite()) || res > FACTOR_CHECK_TOL * nb {
            return Err(Error::IllPosed(format!(
                "matrix is numerically singular (check residual {:.3e})",
                res / nb
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &'static str {
        match self.factor {
            Factor::Cholesky(_) => "cholesky",
            Factor::Lu(_) => "lu",
        }
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mat = MatMut::from_column_major_slice_mut(b, self.n, 1);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(mat),
            Factor::Lu(f) => f.solve_in_place(mat),
        }
    }

    /// Solves each contiguous block of length `n` of `b` in place.
    pub fn solve_blocks_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len() % self.n.max(1), 0);
        if self.n == 0 {
            return;
        }
        let k = b.len() / self.n;
        let mat = MatMut::from_column_major_slice_mut(b, self.n, k);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(mat),
            Factor::Lu(f) => f.solve_in_place(mat),
        }
    }
}

/// Default relative tolerance of the Schur CG.
pub const CG_TOL: f64 = 1e-6;

/// Result of the Schur-complement solve.
#[derive(Clone, Debug)]
pub struct SchurSolution {
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    /// Set when CG hit a direction of vanishing curvature.
    pub truncated: bool,
}

/// Applies `A^{-1}` to a vector of the full vector space; the flow matrix
/// is block diagonal, so each component block is solved separately.
pub fn apply_inverse(factor: &Factorization, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    factor.solve_blocks_in_place(&mut y);
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioner of the Schur CG.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurPreconditioner {
    #[default]
    None,
    /// Jacobi scaling by `diag(B diag(A)^{-1} B^T)`.
    Diagonal,
}

fn jacobi_diagonal(b: &CsrMatrix, a_diag: &[f64]) -> Vec<f64> {
    let n = a_diag.len();
    (0..b.nrows())
        .map(|i| {
            let (cols, vals) = b.row(i);
            let d: f64 = cols
                .iter()
                .zip(vals)
                .map(|(&j, v)| v * v / a_diag[j % n])
                .sum();
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect()
}

/// CG on `B A^{-1} B^T L = B A^{-1} F` from a zero initial guess, stopped at
/// relative residual `tol`.
pub fn schur_solve(
    b: &CsrMatrix,
    factor: &Factorization,
    f: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SchurSolution> {
    schur_solve_preconditioned(b, factor, f, tol, max_iter, None)
}

/// [`schur_solve`] with an optional Jacobi preconditioner given by the
/// diagonal of one component block of `A`.
pub fn schur_solve_preconditioned(
    b: &CsrMatrix,
    factor: &Factorization,
    f: &[f64],
    tol: f64,
    max_iter: usize,
    a_diag: Option<&[f64]>,
) -> Result<SchurSolution> {
    let m = b.nrows();
    let mut lambda = vec![0.0; m];
    let ainv_f = apply_inverse(factor, f);
    let rhs = b.apply(&ainv_f);
    let rhs_norm = dot(&rhs, &rhs).sqrt();
    if rhs_norm == 0.0 || m == 0 {
        return Ok(SchurSolution {
            multipliers: lambda,
            iterations: 0,
            residual: 0.0,
            truncated: false,
        });
    }
    let pinv = a_diag.map(|d| jacobi_diagonal(b, d));
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &pinv {
            Some(p) => r.iter().zip(p).map(|(x, y)| x * y).collect(),
            None => r.to_vec(),
        }
    };
    let mut r = rhs.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut tmp = vec![0.0; b.ncols()];
    let mut sp = vec![0.0; m];
    let mut iterations = 0;
    while iterations < max_iter {
        if dot(&r, &r).sqrt() <= tol * rhs_norm {
            break;
        }
        b.mul_transpose_vec(&p, &mut tmp);
        factor.solve_blocks_in_place(&mut tmp);
        b.mul_vec(&tmp, &mut sp);
        let curv = dot(&p, &sp);
        if curv <= 1e-14 * dot(&p, &p) * rhs_norm.max(1.0) {
            warn!("Schur CG: vanishing curvature after {iterations} iterations, returning current iterate");
            return Ok(SchurSolution {
                multipliers: lambda,
                iterations,
                residual: dot(&r, &r).sqrt() / rhs_norm,
                truncated: true,
            });
        }
        let alpha = rz / curv;
        for i in 0..m {
            lambda[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    let residual = dot(&r, &r).sqrt() / rhs_norm;
    if residual > tol {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(SchurSolution {
        multipliers: lambda,
        iterations,
        residual,
        truncated: false,
    })
}

/// Diagonal of a square matrix.
pub fn diagonal(a: &CsrMatrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| a.get(i, i)).collect()
}

/// `dY = A^{-1}(F - B^T L)`.
pub fn flow_step_solve(
    factor: &Factorization,
    b: &CsrMatrix,
    f: &[f64],
    multipliers: &[f64],
) -> Vec<f64> {
    let bt = b.apply_transpose(multipliers);
    let rhs: Vec<f64> = f.iter().zip(&bt).map(|(u, v)| u - v).collect();
    apply_inverse(factor, &rhs)
}

/// Solves the saddle system in one call; returns `(dY, Schur solution)`.
pub fn saddle_solve(
    factor: &Factorization,
    b: &CsrMatrix,
    f: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SchurSolution)> {
    let s = schur_solve(b, factor, f, tol, max_iter)?;
    let dy = flow_step_solve(factor, b, f, &s.multipliers);
    Ok((dy, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.apply_transpose(&[1.0, 1.0]), vec![6.0, 0.0]);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = Factorization::new(&CsrMatrix::identity(5)).unwrap();
        let mut b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let c = b.clone();
        f.solve_in_place(&mut b);
        assert_eq!(b, c);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = Factorization::new(&a).unwrap();
        assert_eq!(f.kind(), "cholesky");
        let mut b = vec![1.0, 0.0];
        f.solve_in_place(&mut b);
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-15 && (b[1] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_uses_lu() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = Factorization::new(&a).unwrap();
        assert_eq!(f.kind(), "lu");
        let mut b = vec![3.0, 3.0];
        f.solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_ill_posed() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(Factorization::new(&a), Err(Error::IllPosed(_))));
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let a = CsrMatrix::identity(4);
        let f = Factorization::new(&a).unwrap();
        let b = CsrMatrix::from_dense(1, 4, &[1.0, 1.0, 0.0, 0.0]);
        let s = schur_solve(&b, &f, &[0.0; 4], CG_TOL, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.multipliers, vec![0.0]);
    }

    #[test]
    fn range_of_bt_gives_zero_increment() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let fac = Factorization::new(&a).unwrap();
        let b = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0]);
        let f = b.apply_transpose(&[0.7, -1.3]);
        let (dy, s) = saddle_solve(&fac, &b, &f, CG_TOL, 20).unwrap();
        assert!(dy.iter().all(|v| v.abs() < 1e-12));
        assert!((s.multipliers[0] - 0.7).abs() < 1e-10);
    }
}
