//! Lifting operators and the reconstructed discrete Hessian.
//!
//! For an active edge `e` with patch `omega_e` the local liftings solve
//!
//! ```text
//! int_{omega_e} r_e(phi) : tau = int_e {tau} n_e . phi
//! int_{omega_e} b_e(phi) : tau = int_e {div tau} . n_e phi
//! ```
//!
//! over broken `[Q_l]^{2x2}`. Both systems are block diagonal per cell, so
//! each patch cell is solved with its own scalar mass matrix. The discrete
//! Hessian is `H_h[v] = D^2_h v - R_h([grad v]) + B_h([v])`.
//!
//! [`HessianCache`] tabulates, for every cell `K`, the contribution of each
//! basis function of `K` and of its neighbours across active edges to
//! `H_h` at the quadrature points of `K`, plus the data part
//! `H_D = R_h(Phi) - B_h(phi)` from boundary edges carrying jumps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_space::{BoundaryData, BrokenField, BrokenSpace, JumpRule, JumpSet};
use crate::{DenseCholesky, Mat2};

/// Broken matrix-valued lifting spaces `[Q_{l1}]^{2x2}` and `[Q_{l2}]^{2x2}`
/// together with the inverse cell mass matrices.
#[derive(Debug, Clone)]
pub struct LiftingSpace {
    r: Arc<BrokenSpace>,
    b: Arc<BrokenSpace>,
    mass_inv_r: Arc<Vec<Vec<f64>>>,
    mass_inv_b: Arc<Vec<Vec<f64>>>,
}

fn inverse_masses(space: &BrokenSpace) -> Result<Vec<Vec<f64>>> {
    let nb = space.dofs_per_cell();
    let nq = space.num_quad_points();
    (0..space.mesh().num_cells())
        .map(|c| {
            let phi = space.phi(c);
            let jxw = space.jxw(c);
            let mut m = vec![0.0; nb * nb];
            for q in 0..nq {
                let row = &phi[q * nb..(q + 1) * nb];
                for i in 0..nb {
                    for j in 0..nb {
                        m[i * nb + j] += jxw[q] * row[i] * row[j];
                    }
                }
            }
            DenseCholesky::new(&m, nb)
                .map(|f| f.inverse())
                .ok_or_else(|| Error::Internal(format!("singular lifting mass matrix on cell {c}")))
        })
        .collect()
}

impl LiftingSpace {
    /// Lifting spaces of degrees `l1` (for `r_e`) and `l2` (for `b_e`).
    pub fn new(space: &Arc<BrokenSpace>, l1: usize, l2: usize) -> Result<Self> {
        let make = |l: usize| -> Result<Arc<BrokenSpace>> {
            if l == space.degree() {
                Ok(space.clone())
            } else {
                Ok(Arc::new(BrokenSpace::build(space.mesh().clone(), l)?))
            }
        };
        let r = make(l1)?;
        let mass_inv_r = Arc::new(inverse_masses(&r)?);
        let (b, mass_inv_b) = if l2 == l1 {
            (r.clone(), mass_inv_r.clone())
        } else {
            let b = make(l2)?;
            let m = Arc::new(inverse_masses(&b)?);
            (b, m)
        };
        Ok(Self {
            r,
            b,
            mass_inv_r,
            mass_inv_b,
        })
    }

    /// `l1 = l2 = k`.
    pub fn matching(space: &Arc<BrokenSpace>) -> Result<Self> {
        Self::new(space, space.degree(), space.degree())
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.r.degree(), self.b.degree())
    }

    pub fn r_space(&self) -> &Arc<BrokenSpace> {
        &self.r
    }

    pub fn b_space(&self) -> &Arc<BrokenSpace> {
        &self.b
    }
}

/// Restriction of a lifting to one cell: one matrix coefficient per scalar
/// lifting basis function.
#[derive(Clone, Debug)]
pub struct LiftingPart {
    pub cell: usize,
    pub coeffs: Vec<Mat2>,
}

/// Lifting supported on an edge patch.
#[derive(Clone, Debug)]
pub struct LocalLifting {
    pub parts: Vec<LiftingPart>,
    r_kind: bool,
}

impl LocalLifting {
    /// Values at the cell quadrature points of `part.cell`.
    pub fn values_at_quad(&self, lifting: &LiftingSpace, part: usize) -> Vec<Mat2> {
        let space = if self.r_kind { &lifting.r } else { &lifting.b };
        let p = &self.parts[part];
        let nb = space.dofs_per_cell();
        let phi = space.phi(p.cell);
        (0..space.num_quad_points())
            .map(|q| {
                let mut m = Mat2::zero();
                for j in 0..nb {
                    m += p.coeffs[j].scale(phi[q * nb + j]);
                }
                m
            })
            .collect()
    }

    /// Value at quadrature point `q` of `cell`, zero outside the patch.
    pub fn value_at(&self, lifting: &LiftingSpace, cell: usize, q: usize) -> Mat2 {
        let space = if self.r_kind { &lifting.r } else { &lifting.b };
        let nb = space.dofs_per_cell();
        self.parts
            .iter()
            .filter(|p| p.cell == cell)
            .fold(Mat2::zero(), |acc, p| {
                let phi = &space.phi(cell)[q * nb..(q + 1) * nb];
                let mut m = acc;
                for j in 0..nb {
                    m += p.coeffs[j].scale(phi[j]);
                }
                m
            })
    }
}

fn check_edge(lifting: &LiftingSpace, edge: usize, len: usize) -> Result<()> {
    let np = lifting.r.num_edge_points();
    if edge >= lifting.r.mesh().num_edges() {
        return Err(Error::InvalidParameter(format!("edge {edge} out of range")));
    }
    if len != np {
        return Err(Error::InvalidParameter(format!(
            "expected {np} jump values, got {len}"
        )));
    }
    Ok(())
}

/// `r_e(phi)` for a vector jump sampled at the edge quadrature points.
pub fn lift_r(lifting: &LiftingSpace, edge: usize, jump: &[[f64; 2]]) -> Result<LocalLifting> {
    check_edge(lifting, edge, jump.len())?;
    let space = &lifting.r;
    let data = space.edge(edge);
    let w = data.average_weight();
    let n = data.normal;
    let nb = space.dofs_per_cell();
    let parts = data
        .sides
        .iter()
        .map(|side| {
            let mut rhs = vec![Mat2::zero(); nb];
            for (p, j) in jump.iter().enumerate() {
                let wp = w * data.weights[p];
                for l in 0..nb {
                    let psi = side.phi[p * nb + l] * wp;
                    for a in 0..2 {
                        for b in 0..2 {
                            rhs[l].m[a][b] += psi * n[b] * j[a];
                        }
                    }
                }
            }
            LiftingPart {
                cell: side.cell,
                coeffs: apply_inverse(&lifting.mass_inv_r[side.cell], &rhs),
            }
        })
        .collect();
    Ok(LocalLifting {
        parts,
        r_kind: true,
    })
}

/// `b_e(phi)` for a scalar jump sampled at the edge quadrature points.
pub fn lift_b(lifting: &LiftingSpace, edge: usize, jump: &[f64]) -> Result<LocalLifting> {
    check_edge(lifting, edge, jump.len())?;
    let space = &lifting.b;
    let data = space.edge(edge);
    let w = data.average_weight();
    let n = data.normal;
    let nb = space.dofs_per_cell();
    let parts = data
        .sides
        .iter()
        .map(|side| {
            let mut rhs = vec![Mat2::zero(); nb];
            for (p, j) in jump.iter().enumerate() {
                let wp = w * data.weights[p] * j;
                for l in 0..nb {
                    let d = side.dphi[p * nb + l];
                    for a in 0..2 {
                        for b in 0..2 {
                            rhs[l].m[a][b] += wp * d[b] * n[a];
                        }
                    }
                }
            }
            LiftingPart {
                cell: side.cell,
                coeffs: apply_inverse(&lifting.mass_inv_b[side.cell], &rhs),
            }
        })
        .collect();
    Ok(LocalLifting {
        parts,
        r_kind: false,
    })
}

fn apply_inverse(minv: &[f64], rhs: &[Mat2]) -> Vec<Mat2> {
    let nb = rhs.len();
    (0..nb)
        .map(|j| {
            let mut m = Mat2::zero();
            for l in 0..nb {
                m += rhs[l].scale(minv[j * nb + l]);
            }
            m
        })
        .collect()
}

/// `H_h[y]` at every cell quadrature point, assembled term by term from
/// the local liftings of the jumps of `y` (boundary jumps use the field's
/// data). Indexed `[cell * nq + q][component]`.
pub fn discrete_hessian_direct(
    field: &BrokenField,
    lifting: &LiftingSpace,
    rules: &JumpSet,
) -> Result<Vec<[Mat2; 3]>> {
    let space = field.space();
    let mesh = space.mesh();
    let nq = space.num_quad_points();
    let nb = space.dofs_per_cell();
    let mut out = vec![[Mat2::zero(); 3]; mesh.num_cells() * nq];
    for c in 0..mesh.num_cells() {
        let hess = space.hess_phi(c);
        for q in 0..nq {
            for k in 0..3 {
                let coef = &field.component(k)[c * nb..(c + 1) * nb];
                let mut h = Mat2::zero();
                for i in 0..nb {
                    h += hess[q * nb + i].scale(coef[i]);
                }
                out[c * nq + q][k] = h;
            }
        }
    }
    for e in rules.active_edges() {
        let rule = rules.rule(e);
        let tr = field.edge_traces(e, rule)?;
        for k in 0..3 {
            let mut pieces = Vec::new();
            if rule.gradient {
                let jg: Vec<[f64; 2]> = tr.jump_grad.iter().map(|g| g[k]).collect();
                pieces.push((-1.0, lift_r(lifting, e, &jg)?));
            }
            if rule.value {
                let jv: Vec<f64> = tr.jump_value.iter().map(|v| v[k]).collect();
                pieces.push((1.0, lift_b(lifting, e, &jv)?));
            }
            for (sign, lift) in pieces {
                for (pi, part) in lift.parts.iter().enumerate() {
                    for (q, v) in lift.values_at_quad(lifting, pi).into_iter().enumerate() {
                        out[part.cell * nq + q][k] += v.scale(sign);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Tabulated discrete Hessians of the basis functions.
#[derive(Debug, Clone)]
pub struct HessianCache {
    nb: usize,
    nq: usize,
    ns: usize,
    rules: JumpSet,
    footprints: Vec<Vec<usize>>,
    /// Per cell, `[(f * nb + i) * nq + q]` for footprint cell `f`.
    tables: Vec<Vec<Mat2>>,
    /// Per cell, `[q][component]`.
    data: Vec<Vec<[Mat2; 3]>>,
}

/// Composite operators of one patch cell of an edge: maps edge samples to
/// lifting values at the cell quadrature points.
struct EdgeOperators {
    /// `kr[q * np + p]`
    kr: Vec<f64>,
    /// `kb[d][q * np + p]`
    kb: [Vec<f64>; 2],
}

fn edge_operators(lifting: &LiftingSpace, edge: usize, side: usize) -> EdgeOperators {
    let build = |space: &BrokenSpace, minv: &[f64], deriv: Option<usize>| -> Vec<f64> {
        let data = space.edge(edge);
        let s = &data.sides[side];
        let nb = space.dofs_per_cell();
        let nq = space.num_quad_points();
        let np = data.points.len();
        let w = data.average_weight();
        // G[j * np + p] = sum_l Minv[j, l] trace_l(p) w_p
        let mut g = vec![0.0; nb * np];
        for p in 0..np {
            let wp = w * data.weights[p];
            for l in 0..nb {
                let t = match deriv {
                    None => s.phi[p * nb + l],
                    Some(d) => s.dphi[p * nb + l][d],
                } * wp;
                for j in 0..nb {
                    g[j * np + p] += minv[j * nb + l] * t;
                }
            }
        }
        let phi = space.phi(s.cell);
        let mut k = vec![0.0; nq * np];
        for q in 0..nq {
            for j in 0..nb {
                let v = phi[q * nb + j];
                for p in 0..np {
                    k[q * np + p] += v * g[j * np + p];
                }
            }
        }
        k
    };
    let cell = lifting.r.edge(edge).sides[side].cell;
    EdgeOperators {
        kr: build(&lifting.r, &lifting.mass_inv_r[cell], None),
        kb: [
            build(&lifting.b, &lifting.mass_inv_b[cell], Some(0)),
            build(&lifting.b, &lifting.mass_inv_b[cell], Some(1)),
        ],
    }
}

/// Tabulates `H_h` for every basis function and the data part `H_D`.
///
/// `boundary` is required when some boundary edge carries jumps.
pub fn build_hessian_cache(
    space: &Arc<BrokenSpace>,
    lifting: &LiftingSpace,
    rules: &JumpSet,
    boundary: Option<&BoundaryData>,
) -> Result<HessianCache> {
    let mesh = space.mesh();
    if rules.len() != mesh.num_edges() {
        return Err(Error::InvalidParameter(format!(
            "jump rules for {} edges on a mesh with {} edges",
            rules.len(),
            mesh.num_edges()
        )));
    }
    if !Arc::ptr_eq(lifting.r.mesh(), mesh) && lifting.r.mesh().num_cells() != mesh.num_cells() {
        return Err(Error::InvalidParameter(
            "lifting space built on another mesh".into(),
        ));
    }
    let nb = space.dofs_per_cell();
    let nq = space.num_quad_points();
    let np = space.num_edge_points();
    let nc = mesh.num_cells();
    let mut footprints = Vec::with_capacity(nc);
    let mut tables = Vec::with_capacity(nc);
    let mut data = Vec::with_capacity(nc);
    for k in 0..nc {
        let mut fp = vec![k];
        for &e in &mesh.cell_edges(k) {
            if !rules.rule(e).is_active() {
                continue;
            }
            let edge = mesh.edge(e);
            if let Some(p) = edge.plus {
                let other = if edge.minus == k { p } else { edge.minus };
                if !fp.contains(&other) {
                    fp.push(other);
                }
            }
        }
        let mut table = vec![Mat2::zero(); fp.len() * nb * nq];
        let hess = space.hess_phi(k);
        for i in 0..nb {
            for q in 0..nq {
                table[i * nq + q] = hess[q * nb + i];
            }
        }
        let mut hd = vec![[Mat2::zero(); 3]; nq];
        for &e in &mesh.cell_edges(k) {
            let rule = rules.rule(e);
            if !rule.is_active() {
                continue;
            }
            let ed = space.edge(e);
            let side_k = ed
                .sides
                .iter()
                .position(|s| s.cell == k)
                .ok_or_else(|| Error::Internal(format!("cell {k} not adjacent to edge {e}")))?;
            let ops = edge_operators(lifting, e, side_k);
            let n = ed.normal;
            for side in &ed.sides {
                let f = fp.iter().position(|&c| c == side.cell).unwrap_or(0);
                let s = side.sign;
                for i in 0..nb {
                    for q in 0..nq {
                        let mut h = Mat2::zero();
                        for p in 0..np {
                            let kr = ops.kr[q * np + p];
                            let kb = [ops.kb[0][q * np + p], ops.kb[1][q * np + p]];
                            let val = side.phi[p * nb + i];
                            let grad = side.dphi[p * nb + i];
                            for a in 0..2 {
                                for b in 0..2 {
                                    let mut v = 0.0;
                                    if rule.gradient {
                                        v -= n[b] * kr * grad[a];
                                    }
                                    if rule.value {
                                        v += n[a] * kb[b] * val;
                                    }
                                    h.m[a][b] += s * v;
                                }
                            }
                        }
                        table[(f * nb + i) * nq + q] += h;
                    }
                }
            }
            if ed.sides.len() == 1 {
                let bd = boundary.ok_or(Error::MissingBoundaryData { edge: e })?;
                if rule.gradient && bd.gradient.is_none() {
                    return Err(Error::MissingBoundaryData { edge: e });
                }
                let phi: Vec<[f64; 3]> = ed.points.iter().map(|x| (bd.value)(*x)).collect();
                let grad: Option<Vec<[[f64; 2]; 3]>> = bd
                    .gradient
                    .as_ref()
                    .map(|gf| ed.points.iter().map(|x| gf(*x)).collect());
                for (q, hq) in hd.iter_mut().enumerate() {
                    for (comp, h) in hq.iter_mut().enumerate() {
                        for p in 0..np {
                            let kr = ops.kr[q * np + p];
                            let kb = [ops.kb[0][q * np + p], ops.kb[1][q * np + p]];
                            for a in 0..2 {
                                for b in 0..2 {
                                    if rule.gradient {
                                        let g = grad.as_ref().map_or(0.0, |g| g[p][comp][a]);
                                        h.m[a][b] += n[b] * kr * g;
                                    }
                                    if rule.value {
                                        h.m[a][b] -= n[a] * kb[b] * phi[p][comp];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        footprints.push(fp);
        tables.push(table);
        data.push(hd);
    }
    Ok(HessianCache {
        nb,
        nq,
        ns: space.scalar_dofs(),
        rules: rules.clone(),
        footprints,
        tables,
        data,
    })
}

impl HessianCache {
    pub fn rules(&self) -> &JumpSet {
        &self.rules
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.nb
    }

    pub fn num_quad_points(&self) -> usize {
        self.nq
    }

    /// Cells whose basis functions reach `cell`; the cell itself first.
    pub fn footprint(&self, cell: usize) -> &[usize] {
        &self.footprints[cell]
    }

    /// Scalar dofs of the footprint in table order.
    pub fn footprint_dofs(&self, cell: usize) -> Vec<usize> {
        self.footprints[cell]
            .iter()
            .flat_map(|&c| (0..self.nb).map(move |i| c * self.nb + i))
            .collect()
    }

    /// `H_h^0` of footprint basis `j` (in [`Self::footprint_dofs`] order)
    /// at quadrature point `q` of `cell`.
    pub fn basis_hessian(&self, cell: usize, j: usize, q: usize) -> Mat2 {
        self.tables[cell][j * self.nq + q]
    }

    /// All footprint Hessians of `cell`, `[j * nq + q]`.
    pub fn table(&self, cell: usize) -> &[Mat2] {
        &self.tables[cell]
    }

    /// Data part `H_D` at the quadrature points of `cell`.
    pub fn data(&self, cell: usize) -> &[[Mat2; 3]] {
        &self.data[cell]
    }

    /// True if `H_D` vanishes identically.
    pub fn data_is_zero(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.iter().all(|h| h.iter().all(|m| m.norm() == 0.0)))
    }

    /// `H_h^0[v]` of a homogeneous-data vector field at all quadrature points
    /// of `cell`, `[q][component]`.
    pub fn homogeneous(&self, coeffs: &[f64], cell: usize) -> Vec<[Mat2; 3]> {
        let mut out = vec![[Mat2::zero(); 3]; self.nq];
        let dofs = self.footprint_dofs(cell);
        let table = &self.tables[cell];
        for (j, &d) in dofs.iter().enumerate() {
            for k in 0..3 {
                let c = coeffs[k * self.ns + d];
                if c == 0.0 {
                    continue;
                }
                for q in 0..self.nq {
                    out[q][k] += table[j * self.nq + q].scale(c);
                }
            }
        }
        out
    }

    /// `H_h[v] = H_h^0[v] + H_D` at all quadrature points of `cell`.
    pub fn hessian(&self, coeffs: &[f64], cell: usize) -> Vec<[Mat2; 3]> {
        let mut out = self.homogeneous(coeffs, cell);
        for (o, d) in out.iter_mut().zip(&self.data[cell]) {
            for k in 0..3 {
                o[k] += d[k];
            }
        }
        out
    }

    /// `H_h` of a scalar coefficient vector (one component, no data).
    pub fn scalar_homogeneous(&self, coeffs: &[f64], cell: usize) -> Vec<Mat2> {
        let mut out = vec![Mat2::zero(); self.nq];
        let dofs = self.footprint_dofs(cell);
        let table = &self.tables[cell];
        for (j, &d) in dofs.iter().enumerate() {
            let c = coeffs[d];
            if c == 0.0 {
                continue;
            }
            for q in 0..self.nq {
                out[q] += table[j * self.nq + q].scale(c);
            }
        }
        out
    }
}

/// Whether a rule set and data are consistent: every boundary edge with a
/// gradient jump needs `Phi`, every active boundary edge needs `phi`.
pub fn requires_boundary_data(space: &BrokenSpace, rules: &JumpSet) -> JumpRule {
    let mut need = JumpRule::NONE;
    for e in rules.active_edges() {
        if space.edge(e).sides.len() == 1 {
            let r = rules.rule(e);
            need.value |= r.value;
            need.gradient |= r.gradient;
        }
    }
    need
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate;
    use crate::mesh::{BoundaryRegion, Mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(nx: usize, region: BoundaryRegion) -> (Arc<BrokenSpace>, LiftingSpace) {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), nx, nx, region).unwrap();
        let s = Arc::new(BrokenSpace::new(Arc::new(m), 2).unwrap());
        let l = LiftingSpace::matching(&s).unwrap();
        (s, l)
    }

    #[test]
    fn zero_jump_gives_zero_lifting() {
        let (s, l) = setup(2, BoundaryRegion::None);
        let r = lift_r(&l, 0, &[[0.0; 2]; 5]).unwrap();
        let b = lift_b(&l, 0, &[0.0; 5]).unwrap();
        for p in r.parts.iter().chain(&b.parts) {
            assert!(p.coeffs.iter().all(|m| m.norm() == 0.0));
        }
        assert_eq!(s.num_edge_points(), 5);
    }

    #[test]
    fn b_lifting_has_zero_patch_mean() {
        let (s, l) = setup(2, BoundaryRegion::None);
        let e = s.edges().iter().position(|d| d.sides.len() == 2).unwrap();
        let lift = lift_b(&l, e, &[1.0; 5]).unwrap();
        let mut mean = Mat2::zero();
        for (pi, part) in lift.parts.iter().enumerate() {
            for (v, w) in lift.values_at_quad(&l, pi).iter().zip(s.jxw(part.cell)) {
                mean += v.scale(*w);
            }
        }
        assert!(mean.norm() < 1e-13);
    }

    #[test]
    fn quadratic_hessian_is_exact_without_data() {
        let (s, l) = setup(3, BoundaryRegion::None);
        let rules = JumpSet::standard(s.mesh());
        let cache = build_hessian_cache(&s, &l, &rules, None).unwrap();
        let y = interpolate(&s, |x| [x[0] * x[0] + x[0] * x[1], 0.0, 0.0], None);
        for c in 0..9 {
            for h in cache.hessian(y.coeffs(), c) {
                assert!((h[0] - Mat2::sym(2.0, 1.0, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cache_matches_direct_assembly() {
        let (s, l) = setup(2, BoundaryRegion::Lines(vec![(crate::mesh::Axis::X, 0.0)]));
        let bd = BoundaryData::new(
            |x| [x[0] + 0.3 * x[1], x[1], x[0] * x[1]],
            |x| [[1.0, 0.3], [0.0, 1.0], [x[1], x[0]]],
        );
        let rules = JumpSet::standard(s.mesh());
        let cache = build_hessian_cache(&s, &l, &rules, Some(&bd)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..s.vector_dofs())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let y = BrokenField::from_coeffs(s.clone(), coeffs, Some(bd)).unwrap();
        let direct = discrete_hessian_direct(&y, &l, &rules).unwrap();
        for c in 0..4 {
            for (q, h) in cache.hessian(y.coeffs(), c).iter().enumerate() {
                for k in 0..3 {
                    assert!((h[k] - direct[c * 25 + q][k]).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn zero_data_has_zero_data_part() {
        let (s, l) = setup(2, BoundaryRegion::All);
        let bd = BoundaryData::new(|_| [0.0; 3], |_| [[0.0; 2]; 3]);
        let cache = build_hessian_cache(&s, &l, &JumpSet::standard(s.mesh()), Some(&bd)).unwrap();
        assert!(cache.data_is_zero());
    }

    #[test]
    fn missing_data_is_an_error() {
        let (s, l) = setup(1, BoundaryRegion::All);
        let r = build_hessian_cache(&s, &l, &JumpSet::standard(s.mesh()), None);
        assert!(matches!(r, Err(Error::MissingBoundaryData { .. })));
        let bd = BoundaryData::value_only(|x| [x[0], x[1], 0.0]);
        let r = build_hessian_cache(&s, &l, &JumpSet::standard(s.mesh()), Some(&bd));
        assert!(r.is_err());
        let r = build_hessian_cache(&s, &l, &JumpSet::value_anchored(s.mesh()), Some(&bd));
        assert!(r.is_ok());
    }

    #[test]
    fn footprint_contains_edge_neighbours() {
        let (_, l) = setup(3, BoundaryRegion::None);
        let s = l.r_space().clone();
        let cache = build_hessian_cache(&s, &l, &JumpSet::standard(s.mesh()), None).unwrap();
        assert_eq!(cache.footprint(4).len(), 5);
        assert_eq!(cache.footprint(0).len(), 3);
    }

    #[test]
    fn separate_lifting_degrees_build() {
        let (s, _) = setup(2, BoundaryRegion::None);
        let l = LiftingSpace::new(&s, 1, 3).unwrap();
        assert_eq!(l.degrees(), (1, 3));
        let cache = build_hessian_cache(&s, &l, &JumpSet::standard(s.mesh()), None).unwrap();
        let y = interpolate(&s, |x| [x[0] * x[1], 0.0, 0.0], None);
        for h in cache.hessian(y.coeffs(), 0) {
            assert!((h[0] - Mat2::sym(0.0, 1.0, 0.0)).norm() < 1e-10);
        }
    }
}
