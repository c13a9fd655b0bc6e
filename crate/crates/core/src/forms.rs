//! Energies, bilinear forms and constraint matrices.
//!
//! Every bilinear form here acts componentwise, so matrices are assembled
//! once over the scalar dofs and act on each of the three components. The
//! vector dof `comp * N_s + s` is therefore the scalar dof `s` of block
//! `comp`. Data-dependent terms go to vectors of length `3 N_s`.
//!
//! For `y` with the boundary data of the cache,
//! `a_h(y, v) = v^T A y - L . v` and
//! `E_h[y] = 1/2 Y^T A Y - L . Y + E_0 - F . Y`, with `E_0 = E_h[0]` at
//! zero forcing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{BrokenField, BrokenSpace, JumpSet, VectorFn};
use crate::lifting::HessianCache;
use crate::metrics::TargetMetric;
use crate::solvers::CsrMatrix;
use crate::Mat2;

/// Material and discretization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    /// Weight of the L2 term of the discrete H2 product.
    pub sigma: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            lambda: 8.0,
            mu: 6.0,
            gamma0: 1.0,
            gamma1: 1.0,
            sigma: 0.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.lambda >= 0.0
            && self.gamma0 > 0.0
            && self.gamma1 > 0.0
            && self.sigma >= 0.0
            && [self.lambda, self.mu, self.gamma0, self.gamma1, self.sigma]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "material parameters need mu > 0, lambda >= 0, gamma0, gamma1 > 0, sigma >= 0: {self:?}"
            )))
        }
    }

    /// `(mu / 6, mu lambda / (6 (2 mu + lambda)))`, the coefficients of `a_h`.
    pub fn form_coefficients(&self) -> (f64, f64) {
        (
            self.mu / 6.0,
            self.mu * self.lambda / (6.0 * (2.0 * self.mu + self.lambda)),
        )
    }
}

/// Coefficients of a Hessian form
/// `c_f int (aHa):(aHa) + c_t int tr(aHa) tr(aHa) + penalties`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianFormCoefficients {
    pub frobenius: f64,
    pub trace: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl HessianFormCoefficients {
    pub fn bending(m: &MaterialParams) -> Self {
        let (frobenius, trace) = m.form_coefficients();
        Self {
            frobenius,
            trace,
            gamma0: m.gamma0,
            gamma1: m.gamma1,
        }
    }

    /// `int H:H + gamma1 h^-1 [grad][grad] + gamma0 h^-3 [v][v]`.
    pub fn bilaplacian(gamma0: f64, gamma1: f64) -> Self {
        Self {
            frobenius: 1.0,
            trace: 0.0,
            gamma0,
            gamma1,
        }
    }
}

/// `g` and `g^{-1/2}` at every cell quadrature point, `[cell * nq + q]`.
#[derive(Clone, Debug)]
pub struct MetricTable {
    nq: usize,
    g: Vec<Mat2>,
    a: Vec<Mat2>,
}

impl MetricTable {
    pub fn new(space: &BrokenSpace, metric: &TargetMetric) -> Result<Self> {
        let nq = space.num_quad_points();
        let nc = space.mesh().num_cells();
        let mut g = Vec::with_capacity(nc * nq);
        let mut a = Vec::with_capacity(nc * nq);
        for c in 0..nc {
            for &x in space.quad_points(c) {
                g.push(metric.g(x));
                a.push(metric.inv_sqrt(x)?);
            }
        }
        Ok(Self { nq, g, a })
    }

    /// Euclidean metric on every quadrature point.
    pub fn identity(space: &BrokenSpace) -> Self {
        let n = space.mesh().num_cells() * space.num_quad_points();
        Self {
            nq: space.num_quad_points(),
            g: vec![Mat2::identity(); n],
            a: vec![Mat2::identity(); n],
        }
    }

    pub fn g(&self, cell: usize, q: usize) -> Mat2 {
        self.g[cell * self.nq + q]
    }

    pub fn inv_sqrt(&self, cell: usize, q: usize) -> Mat2 {
        self.a[cell * self.nq + q]
    }
}

/// Energy split into its parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub frobenius: f64,
    pub trace: f64,
    pub gradient_penalty: f64,
    pub value_penalty: f64,
    pub forcing: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.frobenius + self.trace + self.gradient_penalty + self.value_penalty - self.forcing
    }
}

/// `int f . y` by the cell rule.
pub fn forcing_work(field: &BrokenField, forcing: Option<&VectorFn>) -> f64 {
    let Some(f) = forcing else { return 0.0 };
    let space = field.space();
    let mut s = 0.0;
    for c in 0..space.mesh().num_cells() {
        for (q, (&x, &w)) in space.quad_points(c).iter().zip(space.jxw(c)).enumerate() {
            let fv = f(x);
            let y = field.at_quad(c, q).value;
            s += w * (fv[0] * y[0] + fv[1] * y[1] + fv[2] * y[2]);
        }
    }
    s
}

/// Hessian-form energy `1/2 c(y, y)` evaluated directly by quadrature of
/// `H_h[y]` and of the edge jumps.
pub fn hessian_form_energy(
    field: &BrokenField,
    cache: &HessianCache,
    metric: &MetricTable,
    coef: HessianFormCoefficients,
) -> Result<EnergyParts> {
    let space = field.space();
    let mut parts = EnergyParts::default();
    for c in 0..space.mesh().num_cells() {
        let h = cache.hessian(field.coeffs(), c);
        for (q, &w) in space.jxw(c).iter().enumerate() {
            let a = metric.inv_sqrt(c, q);
            for hk in &h[q] {
                let m = a * *hk * a;
                parts.frobenius += 0.5 * coef.frobenius * w * m.ddot(&m);
                parts.trace += 0.5 * coef.trace * w * m.trace().powi(2);
            }
        }
    }
    for e in cache.rules().active_edges() {
        let rule = cache.rules().rule(e);
        let ed = space.edge(e);
        let t = field.edge_traces(e, rule)?;
        for (p, &w) in ed.weights.iter().enumerate() {
            let jg: f64 = t.jump_grad[p]
                .iter()
                .map(|r| r[0] * r[0] + r[1] * r[1])
                .sum();
            let jv: f64 = t.jump_value[p].iter().map(|v| v * v).sum();
            parts.gradient_penalty += 0.5 * coef.gamma1 * w * jg / ed.h;
            parts.value_penalty += 0.5 * coef.gamma0 * w * jv / ed.h.powi(3);
        }
    }
    Ok(parts)
}

/// Discrete bending energy `E_h[y]`, with the parts reported separately.
pub fn energy_parts(
    field: &BrokenField,
    cache: &HessianCache,
    metric: &MetricTable,
    material: &MaterialParams,
    forcing: Option<&VectorFn>,
) -> Result<EnergyParts> {
    let mut p = hessian_form_energy(
        field,
        cache,
        metric,
        HessianFormCoefficients::bending(material),
    )?;
    p.forcing = forcing_work(field, forcing);
    Ok(p)
}

/// Discrete bending energy `E_h[y]`.
pub fn energy(
    field: &BrokenField,
    cache: &HessianCache,
    metric: &MetricTable,
    material: &MaterialParams,
    forcing: Option<&VectorFn>,
) -> Result<f64> {
    Ok(energy_parts(field, cache, metric, material, forcing)?.total())
}

/// Assembled Hessian form: scalar block, data vector and data energy.
#[derive(Clone, Debug)]
pub struct AssembledForm {
    /// Scalar block acting on each component.
    pub matrix: CsrMatrix,
    /// `L_i = -c(0, phi_i)`, length `3 N_s`.
    pub data: Vec<f64>,
    /// `1/2 c(0, 0)`.
    pub constant: f64,
}

impl AssembledForm {
    /// `A Y` componentwise.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        let mut out = vec![0.0; y.len()];
        for (yc, oc) in y.chunks(n).zip(out.chunks_mut(n)) {
            self.matrix.mul_vec(yc, oc);
        }
        out
    }

    /// `1/2 Y^T A Y - L . Y + constant`.
    pub fn quadratic_energy(&self, y: &[f64]) -> f64 {
        let ay = self.apply(y);
        0.5 * dot(y, &ay) - dot(&self.data, y) + self.constant
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds the edge penalty terms of active edges: homogeneous part to the
/// triplets and, on boundary edges, data parts to `data` and `constant`.
#[allow(clippy::too_many_arguments)]
fn add_penalties(
    space: &BrokenSpace,
    rules: &JumpSet,
    gamma0: f64,
    gamma1: f64,
    boundary: Option<&crate::fe_space::BoundaryData>,
    triplets: &mut Vec<(usize, usize, f64)>,
    data: &mut [f64],
    constant: &mut f64,
) -> Result<()> {
    let nb = space.dofs_per_cell();
    let ns = space.scalar_dofs();
    for e in rules.active_edges() {
        let rule = rules.rule(e);
        let ed = space.edge(e);
        let g1 = gamma1 / ed.h;
        let g0 = gamma0 / ed.h.powi(3);
        let n_local = ed.sides.len() * nb;
        let mut local = vec![0.0; n_local * n_local];
        for (p, &w) in ed.weights.iter().enumerate() {
            for (si, s) in ed.sides.iter().enumerate() {
                for (ti, t) in ed.sides.iter().enumerate() {
                    let sg = s.sign * t.sign;
                    for i in 0..nb {
                        let (vi, gi) = (s.phi[p * nb + i], s.dphi[p * nb + i]);
                        for j in 0..nb {
                            let (vj, gj) = (t.phi[p * nb + j], t.dphi[p * nb + j]);
                            let mut v = 0.0;
                            if rule.gradient {
                                v += g1 * (gi[0] * gj[0] + gi[1] * gj[1]);
                            }
                            if rule.value {
                                v += g0 * vi * vj;
                            }
                            local[(si * nb + i) * n_local + tj(ti, nb, j)] += sg * w * v;
                        }
                    }
                }
            }
        }
        for (si, s) in ed.sides.iter().enumerate() {
            for (ti, t) in ed.sides.iter().enumerate() {
                for i in 0..nb {
                    for j in 0..nb {
                        let v = local[(si * nb + i) * n_local + tj(ti, nb, j)];
                        if v != 0.0 {
                            triplets.push((s.cell * nb + i, t.cell * nb + j, v));
                        }
                    }
                }
            }
        }
        if ed.sides.len() == 1 {
            let bd = boundary.ok_or(Error::MissingBoundaryData { edge: e })?;
            if rule.gradient && bd.gradient.is_none() {
                return Err(Error::MissingBoundaryData { edge: e });
            }
            let s = &ed.sides[0];
            for (p, (&x, &w)) in ed.points.iter().zip(&ed.weights).enumerate() {
                let phi = (bd.value)(x);
                let grad = bd.gradient.as_ref().map(|g| g(x));
                for k in 0..3 {
                    if rule.value {
                        *constant += 0.5 * g0 * w * phi[k] * phi[k];
                    }
                    if rule.gradient {
                        let gk = grad.expect("checked")[k];
                        *constant += 0.5 * g1 * w * (gk[0] * gk[0] + gk[1] * gk[1]);
                    }
                    for i in 0..nb {
                        let mut v = 0.0;
                        if rule.value {
                            v += g0 * phi[k] * s.phi[p * nb + i];
                        }
                        if rule.gradient {
                            let gk = grad.expect("checked")[k];
                            let d = s.dphi[p * nb + i];
                            v += g1 * (gk[0] * d[0] + gk[1] * d[1]);
                        }
                        data[k * ns + s.cell * nb + i] += w * v;
                    }
                }
            }
        }
    }
    Ok(())
}

#[inline]
fn tj(ti: usize, nb: usize, j: usize) -> usize {
    ti * nb + j
}

/// Assembles a Hessian form from the cache: the scalar block, the data
/// vector `L` and the constant `1/2 c(0, 0)`.
pub fn assemble_hessian_form(
    space: &Arc<BrokenSpace>,
    cache: &HessianCache,
    metric: &MetricTable,
    coef: HessianFormCoefficients,
    boundary: Option<&crate::fe_space::BoundaryData>,
) -> Result<AssembledForm> {
    let nq = space.num_quad_points();
    let ns = space.scalar_dofs();
    let mut triplets = Vec::new();
    let mut data = vec![0.0; 3 * ns];
    let mut constant = 0.0;
    for c in 0..space.mesh().num_cells() {
        let dofs = cache.footprint_dofs(c);
        let nf = dofs.len();
        let table = cache.table(c);
        let hd = cache.data(c);
        let jxw = space.jxw(c);
        // transformed Hessians a H a and their traces
        let mut th = vec![Mat2::zero(); nf * nq];
        let mut tr = vec![0.0; nf * nq];
        for j in 0..nf {
            for q in 0..nq {
                let a = metric.inv_sqrt(c, q);
                let m = a * table[j * nq + q] * a;
                th[j * nq + q] = m;
                tr[j * nq + q] = m.trace();
            }
        }
        for i in 0..nf {
            for j in i..nf {
                let mut v = 0.0;
                for q in 0..nq {
                    let (mi, mj) = (&th[i * nq + q], &th[j * nq + q]);
                    v += jxw[q]
                        * (coef.frobenius * mi.ddot(mj)
                            + coef.trace * tr[i * nq + q] * tr[j * nq + q]);
                }
                if v != 0.0 {
                    triplets.push((dofs[i], dofs[j], v));
                    if i != j {
                        triplets.push((dofs[j], dofs[i], v));
                    }
                }
            }
        }
        for k in 0..3 {
            let md: Vec<Mat2> = (0..nq)
                .map(|q| {
                    let a = metric.inv_sqrt(c, q);
                    a * hd[q][k] * a
                })
                .collect();
            if md.iter().all(|m| m.norm() == 0.0) {
                continue;
            }
            for q in 0..nq {
                constant += 0.5
                    * jxw[q]
                    * (coef.frobenius * md[q].ddot(&md[q]) + coef.trace * md[q].trace().powi(2));
            }
            for (i, &d) in dofs.iter().enumerate() {
                let mut v = 0.0;
                for q in 0..nq {
                    v += jxw[q]
                        * (coef.frobenius * md[q].ddot(&th[i * nq + q])
                            + coef.trace * md[q].trace() * tr[i * nq + q]);
                }
                data[k * ns + d] -= v;
            }
        }
    }
    add_penalties(
        space,
        cache.rules(),
        coef.gamma0,
        coef.gamma1,
        boundary,
        &mut triplets,
        &mut data,
        &mut constant,
    )?;
    Ok(AssembledForm {
        matrix: CsrMatrix::from_triplets(ns, ns, triplets),
        data,
        constant,
    })
}

/// Bending form `a_h`: `(A~, L, E_0)`.
pub fn assemble_bending(
    space: &Arc<BrokenSpace>,
    cache: &HessianCache,
    metric: &MetricTable,
    material: &MaterialParams,
    boundary: Option<&crate::fe_space::BoundaryData>,
) -> Result<AssembledForm> {
    assemble_hessian_form(
        space,
        cache,
        metric,
        HessianFormCoefficients::bending(material),
        boundary,
    )
}

/// Discrete H2 product with homogeneous jumps on the edges of `rules`.
pub fn assemble_h2_product(
    space: &Arc<BrokenSpace>,
    rules: &JumpSet,
    sigma: f64,
) -> Result<CsrMatrix> {
    let nb = space.dofs_per_cell();
    let nq = space.num_quad_points();
    let ns = space.scalar_dofs();
    let mut triplets = Vec::new();
    for c in 0..space.mesh().num_cells() {
        let phi = space.phi(c);
        let hess = space.hess_phi(c);
        let jxw = space.jxw(c);
        for i in 0..nb {
            for j in i..nb {
                let mut v = 0.0;
                for q in 0..nq {
                    v += jxw[q]
                        * (sigma * phi[q * nb + i] * phi[q * nb + j]
                            + hess[q * nb + i].ddot(&hess[q * nb + j]));
                }
                triplets.push((c * nb + i, c * nb + j, v));
                if i != j {
                    triplets.push((c * nb + j, c * nb + i, v));
                }
            }
        }
    }
    let mut scratch = vec![0.0; 3 * ns];
    let mut constant = 0.0;
    add_penalties_homogeneous(space, rules, &mut triplets, &mut scratch, &mut constant)?;
    Ok(CsrMatrix::from_triplets(ns, ns, triplets))
}

fn add_penalties_homogeneous(
    space: &BrokenSpace,
    rules: &JumpSet,
    triplets: &mut Vec<(usize, usize, f64)>,
    data: &mut [f64],
    constant: &mut f64,
) -> Result<()> {
    let zero = crate::fe_space::BoundaryData::new(|_| [0.0; 3], |_| [[0.0; 2]; 3]);
    add_penalties(
        space,
        rules,
        1.0,
        1.0,
        Some(&zero),
        triplets,
        data,
        constant,
    )
}

/// Scalar L2 mass matrix.
pub fn assemble_mass(space: &BrokenSpace) -> CsrMatrix {
    let nb = space.dofs_per_cell();
    let nq = space.num_quad_points();
    let ns = space.scalar_dofs();
    let mut t = Vec::new();
    for c in 0..space.mesh().num_cells() {
        let phi = space.phi(c);
        let jxw = space.jxw(c);
        for i in 0..nb {
            for j in 0..nb {
                let v: f64 = (0..nq)
                    .map(|q| jxw[q] * phi[q * nb + i] * phi[q * nb + j])
                    .sum();
                t.push((c * nb + i, c * nb + j, v));
            }
        }
    }
    CsrMatrix::from_triplets(ns, ns, t)
}

/// Load vector `F_i = int f . phi_i`, length `3 N_s`.
pub fn forcing_vector(space: &BrokenSpace, forcing: Option<&VectorFn>) -> Vec<f64> {
    let ns = space.scalar_dofs();
    let mut out = vec![0.0; 3 * ns];
    if let Some(f) = forcing {
        for k in 0..3 {
            let v = space.load_vector(|x| f(x)[k]);
            out[k * ns..(k + 1) * ns].copy_from_slice(&v);
        }
    }
    out
}

/// Per-cell integrals `int_K (grad y^T grad y - g)`.
pub fn defect_integrals(field: &BrokenField, metric: &MetricTable) -> Vec<Mat2> {
    let space = field.space();
    (0..space.mesh().num_cells())
        .map(|c| {
            let mut m = Mat2::zero();
            for (q, &w) in space.jxw(c).iter().enumerate() {
                let pv = field.at_quad(c, q);
                let mut i = Mat2::zero();
                for k in 0..3 {
                    i += Mat2::outer(pv.grad[k], pv.grad[k]);
                }
                m += (i - metric.g(c, q)).scale(w);
            }
            m
        })
        .collect()
}

/// Metric defect `D_h[y] = sum_K |int_K (grad y^T grad y - g)|_F`.
pub fn metric_defect(field: &BrokenField, metric: &MetricTable) -> f64 {
    defect_integrals(field, metric)
        .iter()
        .map(|m| m.norm())
        .sum()
}

/// Per-cell Frobenius norms of the defect integrals.
pub fn metric_defect_per_cell(field: &BrokenField, metric: &MetricTable) -> Vec<f64> {
    defect_integrals(field, metric)
        .iter()
        .map(|m| m.norm())
        .collect()
}

/// Weight of the off-diagonal multiplier row: the row is
/// `w (S_12 + S_21) / 2` with `S = grad v^T grad y + grad y^T grad v`.
pub const CONSTRAINT_OFFDIAGONAL_WEIGHT: f64 = 1.0;

/// Linearized metric constraint `B_n`, three rows per cell ordered
/// `(11, 22, 12)`, columns over the vector dofs.
pub fn assemble_constraint(field: &BrokenField) -> CsrMatrix {
    assemble_constraint_weighted(field, CONSTRAINT_OFFDIAGONAL_WEIGHT)
}

/// [`assemble_constraint`] with an explicit off-diagonal weight.
pub fn assemble_constraint_weighted(field: &BrokenField, offdiag: f64) -> CsrMatrix {
    let space = field.space();
    let nb = space.dofs_per_cell();
    let ns = space.scalar_dofs();
    let nc = space.mesh().num_cells();
    let mut t = Vec::with_capacity(nc * 9 * nb);
    for c in 0..nc {
        let dphi = space.grad_phi(c);
        let jxw = space.jxw(c);
        let mut rows = vec![[0.0; 3]; 3 * nb];
        for (q, &w) in jxw.iter().enumerate() {
            let gy = field.at_quad(c, q).grad;
            for k in 0..3 {
                let g = gy[k];
                for i in 0..nb {
                    let d = dphi[q * nb + i];
                    let r = &mut rows[k * nb + i];
                    r[0] += w * 2.0 * d[0] * g[0];
                    r[1] += w * 2.0 * d[1] * g[1];
                    r[2] += w * offdiag * (d[0] * g[1] + d[1] * g[0]);
                }
            }
        }
        for k in 0..3 {
            for i in 0..nb {
                for m in 0..3 {
                    let v = rows[k * nb + i][m];
                    if v != 0.0 {
                        t.push((3 * c + m, k * ns + c * nb + i, v));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(3 * nc, 3 * ns, t)
}

/// `sum_K |int_K (grad dy^T grad y + grad y^T grad dy)|_F`.
pub fn linearized_defect(y: &BrokenField, dy: &BrokenField) -> f64 {
    let space = y.space();
    (0..space.mesh().num_cells())
        .map(|c| {
            let mut m = Mat2::zero();
            for (q, &w) in space.jxw(c).iter().enumerate() {
                let (gy, gd) = (y.at_quad(c, q).grad, dy.at_quad(c, q).grad);
                for k in 0..3 {
                    m += (Mat2::outer(gd[k], gy[k]) + Mat2::outer(gy[k], gd[k])).scale(w);
                }
            }
            m.norm()
        })
        .sum()
}

/// `sum_K |int_K grad dy^T grad dy|_F`.
pub fn quadratic_defect(dy: &BrokenField) -> f64 {
    let space = dy.space();
    (0..space.mesh().num_cells())
        .map(|c| {
            let mut m = Mat2::zero();
            for (q, &w) in space.jxw(c).iter().enumerate() {
                let gd = dy.at_quad(c, q).grad;
                for k in 0..3 {
                    m += Mat2::outer(gd[k], gd[k]).scale(w);
                }
            }
            m.norm()
        })
        .sum()
}

/// Stretching energy `1/2 int |grad y^T grad y - g|^2`.
pub fn stretching_energy(field: &BrokenField, metric: &MetricTable) -> f64 {
    let space = field.space();
    let mut e = 0.0;
    for c in 0..space.mesh().num_cells() {
        for (q, &w) in space.jxw(c).iter().enumerate() {
            let p = strain(field, metric, c, q);
            e += 0.5 * w * p.ddot(&p);
        }
    }
    e
}

fn strain(field: &BrokenField, metric: &MetricTable, c: usize, q: usize) -> Mat2 {
    let pv = field.at_quad(c, q);
    let mut i = Mat2::zero();
    for k in 0..3 {
        i += Mat2::outer(pv.grad[k], pv.grad[k]);
    }
    i - metric.g(c, q)
}

/// `s_h(y; ., .)` as a scalar block, and `r = -s_h(y; y, .)` over the
/// vector dofs. With `P = grad y^T grad y - g`,
/// `s_h(y; w, v) = 2 sum_k int grad v_k . P grad w_k`.
pub fn assemble_stretch(field: &BrokenField, metric: &MetricTable) -> (CsrMatrix, Vec<f64>) {
    let space = field.space();
    let nb = space.dofs_per_cell();
    let ns = space.scalar_dofs();
    let mut t = Vec::new();
    let mut rhs = vec![0.0; 3 * ns];
    for c in 0..space.mesh().num_cells() {
        let dphi = space.grad_phi(c);
        let mut local = vec![0.0; nb * nb];
        for (q, &w) in space.jxw(c).iter().enumerate() {
            let pv = field.at_quad(c, q);
            let p = strain(field, metric, c, q);
            for i in 0..nb {
                let pi = p.mul_vec(dphi[q * nb + i]);
                for j in 0..nb {
                    let dj = dphi[q * nb + j];
                    local[i * nb + j] += 2.0 * w * (pi[0] * dj[0] + pi[1] * dj[1]);
                }
                for k in 0..3 {
                    let g = pv.grad[k];
                    rhs[k * ns + c * nb + i] -= 2.0 * w * (pi[0] * g[0] + pi[1] * g[1]);
                }
            }
        }
        for i in 0..nb {
            for j in 0..nb {
                t.push((c * nb + i, c * nb + j, local[i * nb + j]));
            }
        }
    }
    (CsrMatrix::from_triplets(ns, ns, t), rhs)
}

/// Bi-Laplacian form `c_h` with penalties `gamma0_hat`, `gamma1_hat`.
/// The rule set of the cache selects clamped (data on the Dirichlet edges)
/// or value-anchored (values on every boundary edge) preprocessing.
pub fn assemble_bilaplacian(
    space: &Arc<BrokenSpace>,
    cache: &HessianCache,
    gamma0: f64,
    gamma1: f64,
    boundary: Option<&crate::fe_space::BoundaryData>,
) -> Result<AssembledForm> {
    assemble_hessian_form(
        space,
        cache,
        &MetricTable::identity(space),
        HessianFormCoefficients::bilaplacian(gamma0, gamma1),
        boundary,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate;
    use crate::lifting::{build_hessian_cache, LiftingSpace};
    use crate::mesh::{BoundaryRegion, Mesh};

    fn square(n: usize, dirichlet: BoundaryRegion) -> Arc<BrokenSpace> {
        let mesh = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), n, n, dirichlet).unwrap();
        Arc::new(BrokenSpace::new(Arc::new(mesh), 2).unwrap())
    }

    #[test]
    fn identity_map_has_zero_energy_and_defect() {
        let space = square(2, BoundaryRegion::None);
        let rules = JumpSet::standard(space.mesh());
        let lifting = LiftingSpace::matching(&space).unwrap();
        let cache = build_hessian_cache(&space, &lifting, &rules, None).unwrap();
        let y = interpolate(&space, |x| [x[0], x[1], 0.0], None);
        let mt = MetricTable::identity(&space);
        let e = energy(&y, &cache, &mt, &MaterialParams::default(), None).unwrap();
        assert!(e.abs() < 1e-20);
        assert!(metric_defect(&y, &mt) < 1e-14);
        assert!(stretching_energy(&y, &mt) < 1e-28);
    }

    #[test]
    fn constraint_rows_for_identity() {
        let space = square(1, BoundaryRegion::None);
        let y = interpolate(&space, |x| [x[0], x[1], 0.0], None);
        let b = assemble_constraint(&y);
        let (a, bb, c, d) = (0.3, -0.7, 1.1, 0.4);
        let dy = interpolate(
            &space,
            |x| [a * x[0] + bb * x[1], c * x[0] + d * x[1], 0.0],
            None,
        );
        let r = b.apply(dy.coeffs());
        let expect = [2.0 * a, 2.0 * d, bb + c];
        for m in 0..3 {
            assert!((r[m] - expect[m]).abs() < 1e-13, "{m}: {}", r[m]);
        }
    }

    #[test]
    fn constant_field_h2_norms() {
        let space = square(2, BoundaryRegion::None);
        let rules = JumpSet::standard(space.mesh());
        let m = assemble_h2_product(&space, &rules, 1.0).unwrap();
        let one = vec![2.0; space.scalar_dofs()];
        let v = m.bilinear(&one, &one);
        assert!((v - 4.0).abs() < 1e-10, "{v}");
        let space = square(2, "x=0".parse().unwrap());
        let rules = JumpSet::standard(space.mesh());
        let m = assemble_h2_product(&space, &rules, 0.0).unwrap();
        // two Dirichlet edges of length 1/2: sum h^-3 |c|^2 |e| = 2 * 8 * 4 * 0.5
        assert!((m.bilinear(&one, &one) - 32.0).abs() < 1e-10);
    }
}
