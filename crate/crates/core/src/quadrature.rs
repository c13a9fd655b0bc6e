//! Gauss–Legendre and Gauss–Lobatto rules on `[0, 1]`, tensor rules on the
//! reference square, and the one-dimensional Lagrange basis built on
//! Gauss–Lobatto nodes.

use crate::scalar::Scalar;

/// Evaluates the Legendre polynomial `P_n` and its derivative at `x ∈ [-1, 1]`.
fn legendre<T: Scalar>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::of(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the standard recurrence; valid away from |x| = 1
    let nf = T::of(n);
    let dp = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// One-dimensional quadrature rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct QuadRule1d<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> QuadRule1d<T> {
    /// `n`-point Gauss–Legendre rule, exact for degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one point");
        let mut points = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let half = T::lit(0.5);
        for i in 0..n {
            // Chebyshev initial guess, then Newton
            let mut x = -(T::PI() * (T::of(i) + T::lit(0.75)) / (T::of(n) + half)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::lit(4.0) {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            points[i] = (x + T::one()) * half;
            weights[i] = w * half;
        }
        Self { points, weights }
    }

    /// `n`-point Gauss–Lobatto rule (endpoints included), `n >= 2`.
    pub fn gauss_lobatto(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Lobatto needs at least two points");
        let m = n - 1;
        let mut points = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let half = T::lit(0.5);
        let wend = T::lit(2.0) / (T::of(m) * T::of(n));
        points[0] = T::zero();
        points[m] = T::one();
        weights[0] = wend * half;
        weights[m] = wend * half;
        for i in 1..m {
            // interior nodes are roots of P'_m; Newton on P'_m using
            // (1 - x^2) P''_m = 2 x P'_m - m (m + 1) P_m
            let mut x = -(T::PI() * T::of(i) / T::of(m)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(m, x);
                let ddp = (T::lit(2.0) * x * dp - T::of(m) * T::of(m + 1) * p) / (T::one() - x * x);
                let dx = dp / ddp;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::lit(4.0) {
                    break;
                }
            }
            let (p, _) = legendre(m, x);
            points[i] = (x + T::one()) * half;
            weights[i] = wend / (p * p) * half;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor-product rule on the reference square `[0, 1]^2`.
///
/// Point `q = i + n * j` sits at `(points[i], points[j])`.
#[derive(Clone, Debug)]
pub struct QuadRule2d<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
}

impl<T: Scalar> QuadRule2d<T> {
    pub fn tensor(rule: &QuadRule1d<T>) -> Self {
        let n = rule.len();
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([rule.points[i], rule.points[j]]);
                weights.push(rule.weights[i] * rule.weights[j]);
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lagrange basis of degree `k` on the `k + 1` Gauss–Lobatto nodes of `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LagrangeBasis1d<T> {
    nodes: Vec<T>,
    denoms: Vec<T>,
}

impl<T: Scalar> LagrangeBasis1d<T> {
    pub fn gauss_lobatto(degree: usize) -> Self {
        assert!(degree >= 1);
        let nodes = QuadRule1d::<T>::gauss_lobatto(degree + 1).points;
        Self::with_nodes(nodes)
    }

    pub fn with_nodes(nodes: Vec<T>) -> Self {
        let denoms = (0..nodes.len())
            .map(|i| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(T::one(), |acc, (_, &xj)| acc * (nodes[i] - xj))
            })
            .collect();
        Self { nodes, denoms }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Values, first and second derivatives of every basis function at `x`.
    pub fn eval(&self, x: T) -> Vec<[T; 3]> {
        let n = self.nodes.len();
        let mut out = vec![[T::zero(); 3]; n];
        for (i, o) in out.iter_mut().enumerate() {
            // product rule expansion of prod_{j != i} (x - x_j)
            let mut v = T::one();
            let mut d1 = T::zero();
            let mut d2 = T::zero();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let f = x - self.nodes[j];
                d2 = d2 * f + T::lit(2.0) * d1;
                d1 = d1 * f + v;
                v *= f;
            }
            let inv = T::one() / self.denoms[i];
            *o = [v * inv, d1 * inv, d2 * inv];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_high_degree_monomials() {
        let rule = QuadRule1d::<f64>::gauss_legendre(5);
        for p in 0..=9 {
            let s: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(p))
                .sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn lobatto_three_points_are_zero_half_one() {
        let rule = QuadRule1d::<f64>::gauss_lobatto(3);
        assert_eq!(rule.points, vec![0.0, 0.5, 1.0]);
        let w = &rule.weights;
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lobatto_rule_exact_to_degree_2n_minus_3() {
        for n in 3..7 {
            let rule = QuadRule1d::<f64>::gauss_lobatto(n);
            for p in 0..=(2 * n - 3) as i32 {
                let s: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(p))
                    .sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lagrange_basis_is_nodal_and_sums_to_one() {
        let b = LagrangeBasis1d::<f64>::gauss_lobatto(3);
        for (i, &xi) in b.nodes().iter().enumerate() {
            let vals = b.eval(xi);
            for (j, v) in vals.iter().enumerate() {
                assert!((v[0] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let vals = b.eval(0.37);
        let s: [f64; 3] = vals
            .iter()
            .fold([0.0; 3], |a, v| [a[0] + v[0], a[1] + v[1], a[2] + v[2]]);
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-12 && s[2].abs() < 1e-11);
    }

    #[test]
    fn single_precision_rule_is_usable() {
        let rule = QuadRule1d::<f32>::gauss_legendre(4);
        let s: f32 = rule.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}
