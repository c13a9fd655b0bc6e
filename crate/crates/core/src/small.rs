//! Fixed-size 2x2 algebra and a small dense Cholesky used by local solves.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Row-major 2x2 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a00: T, a01: T, a10: T, a11: T) -> Self {
        Self {
            m: [[a00, a01], [a10, a11]],
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn diag(a: T, b: T) -> Self {
        Self::new(a, T::zero(), T::zero(), b)
    }

    /// Symmetric matrix from its three independent entries.
    pub fn sym(a00: T, a01: T, a11: T) -> Self {
        Self::new(a00, a01, a01, a11)
    }

    /// Outer product `u v^T`.
    pub fn outer(u: [T; 2], v: [T; 2]) -> Self {
        Self::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &Self) -> T {
        self.m[0][0] * other.m[0][0]
            + self.m[0][1] * other.m[0][1]
            + self.m[1][0] * other.m[1][0]
            + self.m[1][1] * other.m[1][1]
    }

    pub fn norm(&self) -> T {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn mul_vec(&self, v: [T; 2]) -> [T; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let inv = T::one() / d;
        Some(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    /// Symmetric part `(A + A^T) / 2`.
    pub fn sym_part(&self) -> Self {
        let off = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        Self::new(self.m[0][0], off, off, self.m[1][1])
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn sym_eigenvalues(&self) -> [T; 2] {
        let half = T::lit(0.5);
        let mean = self.trace() * half;
        let diff = (self.m[0][0] - self.m[1][1]) * half;
        let off = (self.m[0][1] + self.m[1][0]) * half;
        let r = (diff * diff + off * off).sqrt();
        [mean - r, mean + r]
    }

    /// Principal square root of an SPD matrix.
    ///
    /// Closed form: with `s = sqrt(det A)` and `t = tr A`,
    /// `sqrt(A) = (A + s I) / sqrt(t + 2 s)`.
    pub fn sqrt_spd(&self) -> Option<Self> {
        let d = self.det();
        let t = self.trace();
        if !(d > T::zero()) || !(t > T::zero()) {
            return None;
        }
        let s = d.sqrt();
        let denom = (t + T::lit(2.0) * s).sqrt();
        Some(Self::new(
            (self.m[0][0] + s) / denom,
            self.m[0][1] / denom,
            self.m[1][0] / denom,
            (self.m[1][1] + s) / denom,
        ))
    }

    /// `A^{-1/2}` of an SPD matrix via [`Mat2::sqrt_spd`].
    pub fn inv_sqrt_spd(&self) -> Option<Self> {
        self.sqrt_spd()?.inverse()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Scalar> AddAssign for Mat2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl<T: Scalar> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Cholesky factor of a small dense SPD matrix, stored row-major.
#[derive(Clone, Debug)]
pub struct DenseCholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> DenseCholesky<T> {
    /// Factorizes the row-major `n x n` matrix `a`. Returns `None` if a pivot
    /// is not strictly positive.
    pub fn new(a: &[T], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Dense row-major inverse.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = T::zero());
            col[j] = T::one();
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}
