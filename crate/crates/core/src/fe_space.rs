//! Broken tensor-product `Q_k` spaces on quadrilateral meshes.
//!
//! Each cell carries a nodal Lagrange basis on the `(k+1)^2` Gauss-Lobatto
//! points of the reference square. Scalar dof `cell * (k+1)^2 + local`;
//! vector fields store their three components one after the other
//! (`component * N_s + scalar_dof`).
//!
//! Cell and edge tables (physical points, weights, basis values, gradients,
//! Hessians) are computed once when the space is built.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Mesh, Point};
use crate::{LagrangeBasis1d, Mat2, QuadRule1d, QuadRule2d};

/// Gauss points per direction for cell integrals.
pub const CELL_QUAD_POINTS: usize = 5;
/// Gauss points for edge integrals.
pub const EDGE_QUAD_POINTS: usize = 5;

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(Point) -> [[f64; 2]; 3] + Send + Sync>;

/// Dirichlet data `(phi, Phi)`; `Phi` may be absent when only values are
/// prescribed.
#[derive(Clone)]
pub struct BoundaryData {
    pub value: VectorFn,
    pub gradient: Option<GradientFn>,
}

impl BoundaryData {
    pub fn new(
        value: impl Fn(Point) -> [f64; 3] + Send + Sync + 'static,
        gradient: impl Fn(Point) -> [[f64; 2]; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
        }
    }

    pub fn value_only(value: impl Fn(Point) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    /// Flat identity data `phi = (x, 0)`, `Phi = [I; 0]`.
    pub fn flat_identity() -> Self {
        Self::new(
            |x| [x[0], x[1], 0.0],
            |_| [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        )
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("gradient", &self.gradient.is_some())
            .finish()
    }
}

/// Which jumps are computed on an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct JumpRule {
    pub value: bool,
    pub gradient: bool,
}

impl JumpRule {
    pub const BOTH: JumpRule = JumpRule {
        value: true,
        gradient: true,
    };
    pub const VALUE: JumpRule = JumpRule {
        value: true,
        gradient: false,
    };
    pub const NONE: JumpRule = JumpRule {
        value: false,
        gradient: false,
    };

    pub fn is_active(&self) -> bool {
        self.value || self.gradient
    }
}

/// Per-edge jump rules.
#[derive(Clone, Debug)]
pub struct JumpSet {
    rules: Vec<JumpRule>,
}

impl JumpSet {
    /// Interior and Dirichlet edges carry both jumps; free edges none.
    pub fn standard(mesh: &Mesh) -> Self {
        let rules = mesh
            .edges()
            .iter()
            .map(|e| match e.class {
                EdgeClass::Interior | EdgeClass::Dirichlet => JumpRule::BOTH,
                EdgeClass::Free => JumpRule::NONE,
            })
            .collect();
        Self { rules }
    }

    /// Interior edges carry both jumps, every boundary edge only the value
    /// jump.
    pub fn value_anchored(mesh: &Mesh) -> Self {
        let rules = mesh
            .edges()
            .iter()
            .map(|e| {
                if e.is_boundary() {
                    JumpRule::VALUE
                } else {
                    JumpRule::BOTH
                }
            })
            .collect();
        Self { rules }
    }

    pub fn from_rules(rules: Vec<JumpRule>) -> Self {
        Self { rules }
    }

    pub fn rule(&self, edge: usize) -> JumpRule {
        self.rules[edge]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn active_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_active())
            .map(|(i, _)| i)
    }

    /// True if some boundary edge is active.
    pub fn has_boundary_jumps(&self, mesh: &Mesh) -> bool {
        self.active_edges().any(|e| mesh.edge(e).is_boundary())
    }
}

/// Basis values at one point of a cell.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub hessians: Vec<Mat2>,
}

/// Traces of the basis of one cell on an edge.
#[derive(Clone, Debug)]
pub struct EdgeSide {
    pub cell: usize,
    /// +1 on the minus side, -1 on the plus side.
    pub sign: f64,
    /// `phi[p * nb + i]`
    pub phi: Vec<f64>,
    pub dphi: Vec<[f64; 2]>,
}

/// Quadrature data of one edge.
#[derive(Clone, Debug)]
pub struct EdgeData {
    pub points: Vec<Point>,
    /// Physical weights (length included).
    pub weights: Vec<f64>,
    pub normal: [f64; 2],
    pub h: f64,
    /// Minus side first; boundary edges have one side.
    pub sides: Vec<EdgeSide>,
}

impl EdgeData {
    /// Averaging weight of the traces: 1/2 inside, 1 on the boundary.
    pub fn average_weight(&self) -> f64 {
        if self.sides.len() == 2 {
            0.5
        } else {
            1.0
        }
    }
}

/// Broken `Q_k` space with precomputed quadrature tables.
#[derive(Debug)]
pub struct BrokenSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    nb: usize,
    nq: usize,
    basis: LagrangeBasis1d,
    cell_rule: QuadRule2d,
    edge_rule: QuadRule1d,
    qx: Vec<Point>,
    jxw: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<[f64; 2]>,
    d2phi: Vec<Mat2>,
    edges: Vec<EdgeData>,
}

/// Reference-face parametrization: `s` in `[0, 1]` along face `f`.
pub fn face_point(face: usize, s: f64) -> [f64; 2] {
    match face {
        0 => [s, 0.0],
        1 => [1.0, s],
        2 => [1.0 - s, 1.0],
        _ => [0.0, 1.0 - s],
    }
}

/// Bilinear reference map of one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellMap {
    v: [Point; 4],
}

impl CellMap {
    pub fn new(v: [Point; 4]) -> Self {
        Self { v }
    }

    pub fn point(&self, xi: [f64; 2]) -> Point {
        let (s, t) = (xi[0], xi[1]);
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        let mut x = [0.0; 2];
        for (vi, wi) in self.v.iter().zip(w) {
            x[0] += wi * vi[0];
            x[1] += wi * vi[1];
        }
        x
    }

    /// Jacobian `J = dx/dxi` (columns are the tangent vectors).
    pub fn jacobian(&self, xi: [f64; 2]) -> Mat2 {
        let v = &self.v;
        let (s, t) = (xi[0], xi[1]);
        let mut j = Mat2::zero();
        for d in 0..2 {
            j.m[d][0] = (1.0 - t) * (v[1][d] - v[0][d]) + t * (v[2][d] - v[3][d]);
            j.m[d][1] = (1.0 - s) * (v[3][d] - v[0][d]) + s * (v[2][d] - v[1][d]);
        }
        j
    }

    /// Reference coordinates of `x` by Newton iteration, if `x` lies in the
    /// cell up to `tol` in reference coordinates.
    pub fn inverse(&self, x: Point, tol: f64) -> Option<[f64; 2]> {
        let mut xi = [0.5, 0.5];
        for _ in 0..50 {
            let p = self.point(xi);
            let r = [x[0] - p[0], x[1] - p[1]];
            let d = self.jacobian(xi).inverse()?.mul_vec(r);
            xi = [xi[0] + d[0], xi[1] + d[1]];
            if d[0].abs() + d[1].abs() < 1e-14 {
                break;
            }
        }
        let inside = xi.iter().all(|v| (-tol..=1.0 + tol).contains(v));
        inside.then(|| [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)])
    }

    /// Mixed derivative `d^2 x / (ds dt)`.
    pub fn mixed(&self) -> [f64; 2] {
        let v = &self.v;
        [
            v[0][0] - v[1][0] + v[2][0] - v[3][0],
            v[0][1] - v[1][1] + v[2][1] - v[3][1],
        ]
    }
}

impl BrokenSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree must be at least 2, got {degree}"
            )));
        }
        Self::build(mesh, degree)
    }

    /// Same tables for any degree `>= 1`; used for lifting spaces.
    pub(crate) fn build(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree must be at least 1, got {degree}"
            )));
        }
        let basis = LagrangeBasis1d::gauss_lobatto(degree);
        let cell_rule = QuadRule2d::tensor(&QuadRule1d::gauss_legendre(CELL_QUAD_POINTS));
        let edge_rule = QuadRule1d::gauss_legendre(EDGE_QUAD_POINTS);
        let nb = (degree + 1) * (degree + 1);
        let nq = cell_rule.len();
        let mut space = Self {
            mesh: mesh.clone(),
            degree,
            nb,
            nq,
            basis,
            cell_rule,
            edge_rule,
            qx: Vec::new(),
            jxw: Vec::new(),
            phi: Vec::new(),
            dphi: Vec::new(),
            d2phi: Vec::new(),
            edges: Vec::new(),
        };
        let nc = mesh.num_cells();
        space.qx.reserve(nc * nq);
        space.jxw.reserve(nc * nq);
        space.phi.reserve(nc * nq * nb);
        space.dphi.reserve(nc * nq * nb);
        space.d2phi.reserve(nc * nq * nb);
        let points = space.cell_rule.points.clone();
        let weights = space.cell_rule.weights.clone();
        for k in 0..nc {
            let map = CellMap::new(mesh.cell_vertices(k));
            for (xi, w) in points.iter().zip(&weights) {
                let det = map.jacobian(*xi).det();
                let ev = space.eval_basis_at(k, *xi)?;
                space.qx.push(map.point(*xi));
                space.jxw.push(w * det);
                space.phi.extend_from_slice(&ev.values);
                space.dphi.extend_from_slice(&ev.gradients);
                space.d2phi.extend_from_slice(&ev.hessians);
            }
        }
        let mut edges = Vec::with_capacity(mesh.num_edges());
        for e in mesh.edges() {
            let minus_map = CellMap::new(mesh.cell_vertices(e.minus));
            let mut data = EdgeData {
                points: Vec::new(),
                weights: Vec::new(),
                normal: e.normal,
                h: e.length,
                sides: Vec::new(),
            };
            for (s, w) in space.edge_rule.points.iter().zip(&space.edge_rule.weights) {
                data.points
                    .push(minus_map.point(face_point(e.faces[0], *s)));
                data.weights.push(w * e.length);
            }
            let mut sides = vec![(e.minus, e.faces[0], 1.0)];
            if let Some(p) = e.plus {
                sides.push((p, e.faces[1], -1.0));
            }
            for (cell, face, sign) in sides {
                let mut side = EdgeSide {
                    cell,
                    sign,
                    phi: Vec::with_capacity(EDGE_QUAD_POINTS * nb),
                    dphi: Vec::with_capacity(EDGE_QUAD_POINTS * nb),
                };
                for &s in &space.edge_rule.points {
                    let s = if sign > 0.0 { s } else { 1.0 - s };
                    let ev = space.eval_basis_at(cell, face_point(face, s))?;
                    side.phi.extend_from_slice(&ev.values);
                    side.dphi.extend_from_slice(&ev.gradients);
                }
                data.sides.push(side);
            }
            edges.push(data);
        }
        space.edges = edges;
        Ok(space)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(k + 1)^2`
    pub fn dofs_per_cell(&self) -> usize {
        self.nb
    }

    /// Scalar dof count `N_s`.
    pub fn scalar_dofs(&self) -> usize {
        self.nb * self.mesh.num_cells()
    }

    /// Dof count of a deformation (three components).
    pub fn vector_dofs(&self) -> usize {
        3 * self.scalar_dofs()
    }

    pub fn num_quad_points(&self) -> usize {
        self.nq
    }

    pub fn num_edge_points(&self) -> usize {
        EDGE_QUAD_POINTS
    }

    pub fn cell_rule(&self) -> &QuadRule2d {
        &self.cell_rule
    }

    pub fn edge_rule(&self) -> &QuadRule1d {
        &self.edge_rule
    }

    /// Reference coordinates of local node `i`.
    pub fn reference_node(&self, i: usize) -> [f64; 2] {
        let n = self.degree + 1;
        let nodes = self.basis.nodes();
        [nodes[i % n], nodes[i / n]]
    }

    /// Physical points of cell quadrature.
    pub fn quad_points(&self, cell: usize) -> &[Point] {
        &self.qx[cell * self.nq..(cell + 1) * self.nq]
    }

    /// Quadrature weights times Jacobian determinant.
    pub fn jxw(&self, cell: usize) -> &[f64] {
        &self.jxw[cell * self.nq..(cell + 1) * self.nq]
    }

    /// Basis values at quadrature points, `[q * nb + i]`.
    pub fn phi(&self, cell: usize) -> &[f64] {
        let s = self.nq * self.nb;
        &self.phi[cell * s..(cell + 1) * s]
    }

    pub fn grad_phi(&self, cell: usize) -> &[[f64; 2]] {
        let s = self.nq * self.nb;
        &self.dphi[cell * s..(cell + 1) * s]
    }

    /// Broken (physical) Hessians of the basis, `[q * nb + i]`.
    pub fn hess_phi(&self, cell: usize) -> &[Mat2] {
        let s = self.nq * self.nb;
        &self.d2phi[cell * s..(cell + 1) * s]
    }

    pub fn edge(&self, e: usize) -> &EdgeData {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[EdgeData] {
        &self.edges
    }

    /// Values, physical gradients and physical Hessians of every basis
    /// function of `cell` at reference point `xi`.
    ///
    /// With `J = dx/dxi` and `m = d^2 x/(ds dt)`:
    /// `grad_x u = J^{-T} grad_xi u` and
    /// `D^2_x u = J^{-T} (D^2_xi u - sum_c (grad_x u)_c D^2_xi x_c) J^{-1}`.
    pub fn eval_basis_at(&self, cell: usize, xi: [f64; 2]) -> Result<BasisEval> {
        let map = CellMap::new(self.mesh.cell_vertices(cell));
        let j = map.jacobian(xi);
        let det = j.det();
        let scale = self.mesh.cell_diameter(cell).powi(2);
        if !(det > 1e-14 * scale) {
            return Err(Error::DegenerateCell { cell, det });
        }
        let jinv = j.inverse().ok_or(Error::DegenerateCell { cell, det })?;
        let jit = jinv.transpose();
        let m = map.mixed();
        let bx = self.basis.eval(xi[0]);
        let by = self.basis.eval(xi[1]);
        let n = self.degree + 1;
        let mut out = BasisEval {
            values: Vec::with_capacity(self.nb),
            gradients: Vec::with_capacity(self.nb),
            hessians: Vec::with_capacity(self.nb),
        };
        for b in 0..n {
            for a in 0..n {
                let (u, du, ddu) = (bx[a][0], bx[a][1], bx[a][2]);
                let (v, dv, ddv) = (by[b][0], by[b][1], by[b][2]);
                let gref = [du * v, u * dv];
                let g = jit.mul_vec(gref);
                let href = Mat2::new(ddu * v, du * dv, du * dv, u * ddv);
                let corr = g[0] * m[0] + g[1] * m[1];
                let h = jit * (href - Mat2::new(0.0, corr, corr, 0.0)) * jinv;
                out.values.push(u * v);
                out.gradients.push(g);
                out.hessians.push(h);
            }
        }
        Ok(out)
    }

    /// Evaluates the basis of `cell` at several reference points.
    pub fn eval_basis(&self, cell: usize, points: &[[f64; 2]]) -> Result<Vec<BasisEval>> {
        points
            .iter()
            .map(|&xi| self.eval_basis_at(cell, xi))
            .collect()
    }

    /// Physical coordinates of the nodes of `cell`.
    pub fn node_points(&self, cell: usize) -> Vec<Point> {
        let map = CellMap::new(self.mesh.cell_vertices(cell));
        (0..self.nb)
            .map(|i| map.point(self.reference_node(i)))
            .collect()
    }

    /// Local node indices at the four cell vertices (counter-clockwise).
    pub fn vertex_nodes(&self) -> [usize; 4] {
        let k = self.degree;
        let n = k + 1;
        [0, k, k + n * k, n * k]
    }

    /// `int phi_i f` for a scalar function; returns a scalar-dof vector.
    pub fn load_vector(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.scalar_dofs()];
        for k in 0..self.mesh.num_cells() {
            let phi = self.phi(k);
            for (q, (x, w)) in self.quad_points(k).iter().zip(self.jxw(k)).enumerate() {
                let fw = f(*x) * w;
                for i in 0..self.nb {
                    out[k * self.nb + i] += fw * phi[q * self.nb + i];
                }
            }
        }
        out
    }
}

/// Vector-valued broken field with optional Dirichlet data.
#[derive(Clone, Debug)]
pub struct BrokenField {
    space: Arc<BrokenSpace>,
    coeffs: Vec<f64>,
    boundary: Option<BoundaryData>,
}

/// Value and gradient of a vector field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointValue {
    pub value: [f64; 3],
    /// Row `k` is the gradient of component `k`.
    pub grad: [[f64; 2]; 3],
}

/// Jumps and averages at the quadrature points of an edge.
#[derive(Clone, Debug, Default)]
pub struct EdgeTraces {
    pub jump_value: Vec<[f64; 3]>,
    pub jump_grad: Vec<[[f64; 2]; 3]>,
    pub average_value: Vec<[f64; 3]>,
    pub average_grad: Vec<[[f64; 2]; 3]>,
}

impl BrokenField {
    pub fn zeros(space: Arc<BrokenSpace>, boundary: Option<BoundaryData>) -> Self {
        let n = space.vector_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
            boundary,
        }
    }

    pub fn from_coeffs(
        space: Arc<BrokenSpace>,
        coeffs: Vec<f64>,
        boundary: Option<BoundaryData>,
    ) -> Result<Self> {
        if coeffs.len() != space.vector_dofs() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                space.vector_dofs(),
                coeffs.len()
            )));
        }
        Ok(Self {
            space,
            coeffs,
            boundary,
        })
    }

    pub fn space(&self) -> &Arc<BrokenSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn boundary(&self) -> Option<&BoundaryData> {
        self.boundary.as_ref()
    }

    pub fn set_boundary(&mut self, boundary: Option<BoundaryData>) {
        self.boundary = boundary;
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let n = self.space.scalar_dofs();
        &self.coeffs[k * n..(k + 1) * n]
    }

    /// Value and gradient at cell quadrature point `q`.
    pub fn at_quad(&self, cell: usize, q: usize) -> PointValue {
        let nb = self.space.nb;
        let phi = &self.space.phi(cell)[q * nb..(q + 1) * nb];
        let dphi = &self.space.grad_phi(cell)[q * nb..(q + 1) * nb];
        let mut out = PointValue::default();
        for k in 0..3 {
            let c = &self.component(k)[cell * nb..(cell + 1) * nb];
            for i in 0..nb {
                out.value[k] += c[i] * phi[i];
                out.grad[k][0] += c[i] * dphi[i][0];
                out.grad[k][1] += c[i] * dphi[i][1];
            }
        }
        out
    }

    /// Value at a physical point, taken from the first cell containing it.
    pub fn value_at_point(&self, x: Point) -> Result<[f64; 3]> {
        let mesh = self.space.mesh();
        for c in 0..mesh.num_cells() {
            if let Some(xi) = CellMap::new(mesh.cell_vertices(c)).inverse(x, 1e-10) {
                return Ok(self.eval(c, xi)?.0.value);
            }
        }
        Err(Error::InvalidParameter(format!(
            "point ({}, {}) lies outside the mesh",
            x[0], x[1]
        )))
    }

    /// Value, gradient and broken Hessian at a reference point of a cell.
    pub fn eval(&self, cell: usize, xi: [f64; 2]) -> Result<(PointValue, [Mat2; 3])> {
        let ev = self.space.eval_basis_at(cell, xi)?;
        let nb = self.space.nb;
        let mut out = PointValue::default();
        let mut hess = [Mat2::zero(); 3];
        for k in 0..3 {
            let c = &self.component(k)[cell * nb..(cell + 1) * nb];
            for i in 0..nb {
                out.value[k] += c[i] * ev.values[i];
                out.grad[k][0] += c[i] * ev.gradients[i][0];
                out.grad[k][1] += c[i] * ev.gradients[i][1];
                hess[k] += ev.hessians[i].scale(c[i]);
            }
        }
        Ok((out, hess))
    }

    fn side_trace(&self, side: &EdgeSide, p: usize) -> PointValue {
        let nb = self.space.nb;
        let phi = &side.phi[p * nb..(p + 1) * nb];
        let dphi = &side.dphi[p * nb..(p + 1) * nb];
        let mut out = PointValue::default();
        for k in 0..3 {
            let c = &self.component(k)[side.cell * nb..(side.cell + 1) * nb];
            for i in 0..nb {
                out.value[k] += c[i] * phi[i];
                out.grad[k][0] += c[i] * dphi[i][0];
                out.grad[k][1] += c[i] * dphi[i][1];
            }
        }
        out
    }

    /// One-sided traces at the edge quadrature points (minus side first).
    pub fn traces(&self, edge: usize) -> Vec<Vec<PointValue>> {
        let data = self.space.edge(edge);
        data.sides
            .iter()
            .map(|s| {
                (0..data.points.len())
                    .map(|p| self.side_trace(s, p))
                    .collect()
            })
            .collect()
    }

    /// Jumps and averages on an edge.
    ///
    /// Interior edges: `[v] = v^- - v^+`. Boundary edges with an active rule:
    /// `[v] = v - phi`, `[grad v] = grad v - Phi`. Inactive parts are zero.
    pub fn edge_traces(&self, edge: usize, rule: JumpRule) -> Result<EdgeTraces> {
        let data = self.space.edge(edge);
        let np = data.points.len();
        let tr = self.traces(edge);
        let mut out = EdgeTraces {
            jump_value: vec![[0.0; 3]; np],
            jump_grad: vec![[[0.0; 2]; 3]; np],
            average_value: vec![[0.0; 3]; np],
            average_grad: vec![[[0.0; 2]; 3]; np],
        };
        let w = data.average_weight();
        let boundary = if data.sides.len() == 1 && rule.is_active() {
            let b = self
                .boundary
                .as_ref()
                .ok_or(Error::MissingBoundaryData { edge })?;
            if rule.gradient && b.gradient.is_none() {
                return Err(Error::MissingBoundaryData { edge });
            }
            Some(b)
        } else {
            None
        };
        for p in 0..np {
            for k in 0..3 {
                for s in &tr {
                    out.average_value[p][k] += w * s[p].value[k];
                    for d in 0..2 {
                        out.average_grad[p][k][d] += w * s[p].grad[k][d];
                    }
                }
            }
            let minus = tr[0][p];
            let (mut jv, mut jg) = (minus.value, minus.grad);
            if tr.len() == 2 {
                let plus = tr[1][p];
                for k in 0..3 {
                    jv[k] -= plus.value[k];
                    jg[k][0] -= plus.grad[k][0];
                    jg[k][1] -= plus.grad[k][1];
                }
            } else if let Some(b) = boundary {
                let x = data.points[p];
                let phi = (b.value)(x);
                for k in 0..3 {
                    jv[k] -= phi[k];
                }
                if let Some(gf) = &b.gradient {
                    let g = gf(x);
                    for k in 0..3 {
                        jg[k][0] -= g[k][0];
                        jg[k][1] -= g[k][1];
                    }
                }
            }
            if rule.value {
                out.jump_value[p] = jv;
            }
            if rule.gradient {
                out.jump_grad[p] = jg;
            }
        }
        Ok(out)
    }

    /// L2 norm of the value jump over the Dirichlet edges.
    pub fn dirichlet_jump_norm(&self) -> Result<f64> {
        let mesh = self.space.mesh().clone();
        let mut s = 0.0;
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.class != EdgeClass::Dirichlet {
                continue;
            }
            let t = self.edge_traces(e, JumpRule::VALUE)?;
            for (j, w) in t.jump_value.iter().zip(&self.space.edge(e).weights) {
                s += w * (j[0] * j[0] + j[1] * j[1] + j[2] * j[2]);
            }
        }
        Ok(s.sqrt())
    }

    /// Nodal values at the cell vertices, `[cell][vertex]`.
    pub fn vertex_values(&self) -> Vec<[[f64; 3]; 4]> {
        let nb = self.space.nb;
        let vn = self.space.vertex_nodes();
        (0..self.space.mesh.num_cells())
            .map(|c| {
                let mut out = [[0.0; 3]; 4];
                for (v, &i) in vn.iter().enumerate() {
                    for k in 0..3 {
                        out[v][k] = self.component(k)[c * nb + i];
                    }
                }
                out
            })
            .collect()
    }
}

/// Nodal interpolant of `f` cell by cell.
pub fn interpolate(
    space: &Arc<BrokenSpace>,
    f: impl Fn(Point) -> [f64; 3],
    boundary: Option<BoundaryData>,
) -> BrokenField {
    let ns = space.scalar_dofs();
    let nb = space.nb;
    let mut coeffs = vec![0.0; 3 * ns];
    for c in 0..space.mesh.num_cells() {
        for (i, x) in space.node_points(c).into_iter().enumerate() {
            let v = f(x);
            for k in 0..3 {
                coeffs[k * ns + c * nb + i] = v[k];
            }
        }
    }
    BrokenField {
        space: space.clone(),
        coeffs,
        boundary,
    }
}

/// Scalar nodal interpolant.
pub fn interpolate_scalar(space: &BrokenSpace, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let nb = space.nb;
    let mut out = vec![0.0; space.scalar_dofs()];
    for c in 0..space.mesh.num_cells() {
        for (i, x) in space.node_points(c).into_iter().enumerate() {
            out[c * nb + i] = f(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryRegion;

    fn square(n: usize) -> Arc<BrokenSpace> {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), n, n, BoundaryRegion::All).unwrap();
        Arc::new(BrokenSpace::new(Arc::new(m), 2).unwrap())
    }

    #[test]
    fn nine_basis_functions_per_cell() {
        let s = square(1);
        assert_eq!(s.dofs_per_cell(), 9);
        assert_eq!(s.scalar_dofs(), 9);
    }

    #[test]
    fn partition_of_unity_and_cell_area() {
        let m = Mesh::disc(1.0, 20).unwrap();
        let s = BrokenSpace::new(Arc::new(m), 2).unwrap();
        for c in 0..s.mesh().num_cells() {
            for q in 0..s.num_quad_points() {
                let sum: f64 = s.phi(c)[q * 9..(q + 1) * 9].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
            let area: f64 = s.jxw(c).iter().sum();
            assert!((area - s.mesh().cell_area(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_has_exact_hessian_on_affine_cell() {
        let m = Mesh::rectangle((0.0, 2.0), (1.0, 2.0), 1, 1, BoundaryRegion::None).unwrap();
        let s = Arc::new(BrokenSpace::new(Arc::new(m), 2).unwrap());
        let y = interpolate(&s, |x| [x[0] * x[0], 0.0, 0.0], None);
        for q in 0..s.num_quad_points() {
            let mut h = Mat2::zero();
            for i in 0..9 {
                h += s.hess_phi(0)[q * 9 + i].scale(y.component(0)[i]);
            }
            assert!((h - Mat2::diag(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_biquadratics_on_skewed_cell() {
        let m = Mesh::disc(1.0, 5).unwrap();
        let s = Arc::new(BrokenSpace::new(Arc::new(m), 2).unwrap());
        let f = |x: Point| [x[0] * x[1], x[0] + 2.0 * x[1], 1.0];
        let y = interpolate(&s, f, None);
        // on non-affine cells a global quadratic is not in Q2 o F^-1; check
        // the central (affine) cell only
        let c = 2;
        assert!(s.mesh().is_affine(c));
        let (pv, h) = y.eval(c, [0.3, 0.7]).unwrap();
        let x = CellMap::new(s.mesh().cell_vertices(c)).point([0.3, 0.7]);
        let exact = f(x);
        for k in 0..3 {
            assert!((pv.value[k] - exact[k]).abs() < 1e-12);
        }
        assert!((h[0] - Mat2::sym(0.0, 1.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn curved_cell_hessian_converges() {
        let mut mesh = Mesh::disc(1.0, 20).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..3 {
            let s = Arc::new(BrokenSpace::new(Arc::new(mesh.clone()), 2).unwrap());
            let y = interpolate(&s, |x| [x[0] * x[1], 0.0, 0.0], None);
            let mut err: f64 = 0.0;
            for c in 0..mesh.num_cells() {
                let (_, h) = y.eval(c, [0.5, 0.5]).unwrap();
                err = err.max((h[0] - Mat2::sym(0.0, 1.0, 0.0)).norm());
            }
            if prev.is_finite() && prev > 1e-10 {
                assert!(prev / err >= 1.8, "ratio {}", prev / err);
            }
            prev = err;
            mesh = mesh.uniform_refine().unwrap();
        }
    }

    #[test]
    fn edge_points_agree_from_both_sides() {
        let m = Mesh::disc(1.0, 20).unwrap();
        let s = BrokenSpace::new(Arc::new(m), 2).unwrap();
        for (e, data) in s.edges().iter().enumerate() {
            if data.sides.len() < 2 {
                continue;
            }
            let edge = s.mesh().edge(e);
            let plus = CellMap::new(s.mesh().cell_vertices(edge.plus.unwrap()));
            for (p, &t) in s.edge_rule().points.iter().enumerate() {
                let xp = plus.point(face_point(edge.faces[1], 1.0 - t));
                let xm = data.points[p];
                assert!((xp[0] - xm[0]).abs() < 1e-12 && (xp[1] - xm[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuous_field_has_no_interior_jump() {
        let s = square(3);
        let y = interpolate(&s, |x| [x[0] * x[1], x[1] * x[1], 3.0], None);
        for (e, d) in s.edges().iter().enumerate() {
            if d.sides.len() == 2 {
                let t = y.edge_traces(e, JumpRule::BOTH).unwrap();
                for j in &t.jump_value {
                    assert!(j.iter().all(|v| v.abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn zero_field_dirichlet_jump_is_minus_data() {
        let s = square(2);
        let y = BrokenField::zeros(s.clone(), Some(BoundaryData::flat_identity()));
        let e = s.edges().iter().position(|d| d.sides.len() == 1).unwrap();
        let t = y.edge_traces(e, JumpRule::BOTH).unwrap();
        for (p, x) in s.edge(e).points.iter().enumerate() {
            assert!((t.jump_value[p][0] + x[0]).abs() < 1e-14);
            assert!((t.jump_value[p][1] + x[1]).abs() < 1e-14);
            assert!((t.jump_grad[p][0][0] + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_data_is_reported() {
        let s = square(1);
        let y = BrokenField::zeros(s.clone(), None);
        assert!(matches!(
            y.edge_traces(0, JumpRule::BOTH),
            Err(Error::MissingBoundaryData { edge: 0 })
        ));
        let y = BrokenField::zeros(s, Some(BoundaryData::value_only(|x| [x[0], x[1], 0.0])));
        assert!(y.edge_traces(0, JumpRule::VALUE).is_ok());
        assert!(y.edge_traces(0, JumpRule::BOTH).is_err());
    }

    #[test]
    fn cell_index_constant_jump_sign() {
        let m = Mesh::rectangle((0.0, 2.0), (0.0, 1.0), 2, 1, BoundaryRegion::None).unwrap();
        let s = Arc::new(BrokenSpace::new(Arc::new(m), 2).unwrap());
        let mut y = BrokenField::zeros(s.clone(), None);
        for i in 9..18 {
            y.coeffs_mut()[i] = 1.0;
        }
        let e = s.edges().iter().position(|d| d.sides.len() == 2).unwrap();
        let t = y.edge_traces(e, JumpRule::BOTH).unwrap();
        assert!(t.jump_value.iter().all(|j| (j[0] + 1.0).abs() < 1e-14));
        assert!(t.average_value.iter().all(|a| (a[0] - 0.5).abs() < 1e-14));
    }

    #[test]
    fn identity_interpolant_has_flat_gradient() {
        let s = square(2);
        let y = interpolate(&s, |x| [x[0], x[1], 0.0], None);
        for c in 0..4 {
            for q in 0..25 {
                let pv = y.at_quad(c, q);
                assert!((pv.grad[0][0] - 1.0).abs() < 1e-12 && pv.grad[0][1].abs() < 1e-12);
                assert!((pv.grad[1][1] - 1.0).abs() < 1e-12 && pv.grad[1][0].abs() < 1e-12);
                assert!(pv.grad[2][0].abs() < 1e-14 && pv.grad[2][1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degree_one_is_rejected() {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 1, 1, BoundaryRegion::None).unwrap();
        assert!(BrokenSpace::new(Arc::new(m), 1).is_err());
    }
}
