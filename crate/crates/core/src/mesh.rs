//! Structured quadrilateral meshes of rectangles and discs.
//!
//! A mesh is generated from one or more *blocks*. Each block is a curvilinear
//! quadrilateral whose sides are straight segments or circular arcs, mapped
//! from the unit square by transfinite interpolation and subdivided into a
//! uniform `nx x ny` grid in reference coordinates. Cells are the bilinear
//! quadrilaterals spanned by the resulting vertices, so cells touching an arc
//! have straight sides (chords) with vertices on the circle.
//!
//! Refinement doubles the block divisions and regenerates the mesh, which
//! keeps disc boundary vertices exactly on the circle.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Coordinate axis used by [`BoundaryRegion`] line descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Part of the boundary selected for Dirichlet conditions.
///
/// Textual form: `none`, `all`, or `;`-separated lines such as `x=0;y=0` or
/// `x=-2;x=2`. An edge belongs to the region when its midpoint does.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryRegion {
    None,
    All,
    Lines(Vec<(Axis, f64)>),
}

impl BoundaryRegion {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            BoundaryRegion::None => false,
            BoundaryRegion::All => true,
            BoundaryRegion::Lines(lines) => lines.iter().any(|&(axis, v)| {
                let c = match axis {
                    Axis::X => p[0],
                    Axis::Y => p[1],
                };
                (c - v).abs() <= 1e-9 * (1.0 + v.abs())
            }),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, BoundaryRegion::None)
            || matches!(self, BoundaryRegion::Lines(l) if l.is_empty())
    }
}

impl fmt::Display for BoundaryRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryRegion::None => write!(f, "none"),
            BoundaryRegion::All => write!(f, "all"),
            BoundaryRegion::Lines(lines) => {
                let parts: Vec<String> = lines
                    .iter()
                    .map(|(a, v)| {
                        let n = if *a == Axis::X { "x" } else { "y" };
                        format!("{n}={v}")
                    })
                    .collect();
                write!(f, "{}", parts.join(";"))
            }
        }
    }
}

impl FromStr for BoundaryRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "" | "none" => return Ok(BoundaryRegion::None),
            "all" => return Ok(BoundaryRegion::All),
            _ => {}
        }
        let mut lines = Vec::new();
        for part in s.split(';') {
            let (lhs, rhs) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad boundary line `{part}`")))?;
            let axis = match lhs.trim() {
                "x" | "x1" => Axis::X,
                "y" | "x2" => Axis::Y,
                other => return Err(Error::Config(format!("bad axis `{other}`"))),
            };
            let v: f64 = rhs
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad coordinate `{rhs}`")))?;
            lines.push((axis, v));
        }
        Ok(BoundaryRegion::Lines(lines))
    }
}

impl Serialize for BoundaryRegion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BoundaryRegion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Side of a block: straight segment or circular arc about a center.
#[derive(Clone, Copy, Debug)]
enum Side {
    Line,
    Arc { center: Point, radius: f64 },
}

/// Curvilinear quadrilateral mapped from `[0,1]^2` by transfinite interpolation.
#[derive(Clone, Debug)]
struct Block {
    corners: [Point; 4],
    /// bottom (c0->c1), right (c1->c2), top (c3->c2), left (c0->c3)
    sides: [Side; 4],
    nx: usize,
    ny: usize,
}

impl Block {
    fn side_point(&self, side: usize, s: f64) -> Point {
        let (p, q) = match side {
            0 => (self.corners[0], self.corners[1]),
            1 => (self.corners[1], self.corners[2]),
            2 => (self.corners[3], self.corners[2]),
            _ => (self.corners[0], self.corners[3]),
        };
        match self.sides[side] {
            Side::Line => [(1.0 - s) * p[0] + s * q[0], (1.0 - s) * p[1] + s * q[1]],
            Side::Arc { center, radius } => {
                let t0 = (p[1] - center[1]).atan2(p[0] - center[0]);
                let t1 = (q[1] - center[1]).atan2(q[0] - center[0]);
                let mut d = t1 - t0;
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                let t = t0 + s * d;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            }
        }
    }

    fn map(&self, u: f64, v: f64) -> Point {
        // exact corners avoid round-off between neighbouring blocks
        let c = &self.corners;
        let eps = 1e-15;
        if u.abs() < eps && v.abs() < eps {
            return c[0];
        }
        if (u - 1.0).abs() < eps && v.abs() < eps {
            return c[1];
        }
        if (u - 1.0).abs() < eps && (v - 1.0).abs() < eps {
            return c[2];
        }
        if u.abs() < eps && (v - 1.0).abs() < eps {
            return c[3];
        }
        let b = self.side_point(0, u);
        let r = self.side_point(1, v);
        let t = self.side_point(2, u);
        let l = self.side_point(3, v);
        let mut x = [0.0; 2];
        for d in 0..2 {
            x[d] = (1.0 - v) * b[d] + v * t[d] + (1.0 - u) * l[d] + u * r[d]
                - ((1.0 - u) * (1.0 - v) * c[0][d]
                    + u * (1.0 - v) * c[1][d]
                    + u * v * c[2][d]
                    + (1.0 - u) * v * c[3][d]);
        }
        x
    }
}

/// Classification of an edge of the mesh skeleton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    Interior,
    Dirichlet,
    Free,
}

/// Oriented edge. The *minus* cell is the lower-indexed neighbour and the
/// normal points from it towards the *plus* cell (outward on the boundary).
#[derive(Clone, Debug)]
pub struct Edge {
    pub minus: usize,
    pub plus: Option<usize>,
    /// Local face index in the minus and plus cells.
    pub faces: [usize; 2],
    /// Endpoints, ordered as the minus cell traverses its face.
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
    pub class: EdgeClass,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }
}

/// Conforming quadrilateral mesh.
///
/// Cell vertices are counter-clockwise; local face `f` joins local vertices
/// `f` and `(f + 1) % 4`, i.e. faces are bottom, right, top, left in
/// reference coordinates.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 4]>,
    cell_edges: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    cell_diameters: Vec<f64>,
    blocks: Vec<Block>,
    dirichlet: BoundaryRegion,
}

/// Edge index sets of the skeleton.
#[derive(Clone, Debug, Default)]
pub struct Skeleton {
    pub active: Vec<usize>,
    pub interior: Vec<usize>,
    pub dirichlet: Vec<usize>,
}

impl Mesh {
    /// Uniform `nx x ny` tensor grid of a rectangle.
    pub fn rectangle(
        x_range: (f64, f64),
        y_range: (f64, f64),
        nx: usize,
        ny: usize,
        dirichlet: BoundaryRegion,
    ) -> Result<Self> {
        let (x0, x1) = x_range;
        let (y0, y1) = y_range;
        if !(x1 > x0)
            || !(y1 > y0)
            || !x0.is_finite()
            || !x1.is_finite()
            || !y0.is_finite()
            || !y1.is_finite()
        {
            return Err(Error::InvalidDomain(format!(
                "degenerate rectangle ({x0}, {x1}) x ({y0}, {y1})"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("nx and ny must be positive".into()));
        }
        let block = Block {
            corners: [[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            sides: [Side::Line; 4],
            nx,
            ny,
        };
        Self::from_blocks(vec![block], dirichlet)
    }

    /// Disc of the given radius centred at the origin with `target_cells`
    /// cells (`5 * 4^l`): a central square surrounded by four curved blocks.
    pub fn disc(radius: f64, target_cells: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidDomain(format!("disc radius {radius}")));
        }
        let mut n = 1usize;
        loop {
            if 5 * n * n == target_cells {
                break;
            }
            if 5 * n * n > target_cells {
                return Err(Error::InvalidParameter(format!(
                    "disc mesh needs 5*4^l cells, got {target_cells}"
                )));
            }
            n *= 2;
        }
        let s = radius / 2f64.sqrt();
        // inner square scaled so cell sizes match across the block interfaces
        let a = s / (1.0 + 2f64.sqrt());
        let v = [
            [-s, -s],
            [s, -s],
            [-a, -a],
            [a, -a],
            [-a, a],
            [a, a],
            [-s, s],
            [s, s],
        ];
        let arc = Side::Arc {
            center: [0.0, 0.0],
            radius,
        };
        let quads: [([usize; 4], [Side; 4]); 5] = [
            ([0, 1, 3, 2], [arc, Side::Line, Side::Line, Side::Line]),
            ([0, 2, 4, 6], [Side::Line, Side::Line, Side::Line, arc]),
            ([2, 3, 5, 4], [Side::Line; 4]),
            ([1, 7, 5, 3], [arc, Side::Line, Side::Line, Side::Line]),
            ([6, 4, 5, 7], [Side::Line, Side::Line, Side::Line, arc]),
        ];
        let blocks = quads
            .iter()
            .map(|(c, sides)| Block {
                corners: [v[c[0]], v[c[1]], v[c[2]], v[c[3]]],
                sides: *sides,
                nx: n,
                ny: n,
            })
            .collect();
        Self::from_blocks(blocks, BoundaryRegion::None)
    }

    /// Splits every cell into four.
    pub fn uniform_refine(&self) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block {
                nx: 2 * b.nx,
                ny: 2 * b.ny,
                ..b.clone()
            })
            .collect();
        Self::from_blocks(blocks, self.dirichlet.clone())
    }

    fn from_blocks(blocks: Vec<Block>, dirichlet: BoundaryRegion) -> Result<Self> {
        let mut vertices: Vec<Point> = Vec::new();
        let mut lookup: HashMap<(i64, i64), usize> = HashMap::new();
        let quant = 1e8;
        let mut vertex_id = |p: Point, vertices: &mut Vec<Point>| -> usize {
            let key = ((p[0] * quant).round() as i64, (p[1] * quant).round() as i64);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(&id) = lookup.get(&(key.0 + dx, key.1 + dy)) {
                        if dist(vertices[id], p) < 1e-9 {
                            return id;
                        }
                    }
                }
            }
            vertices.push(p);
            lookup.insert(key, vertices.len() - 1);
            vertices.len() - 1
        };

        let mut cells = Vec::new();
        for b in &blocks {
            let mut ids = vec![0usize; (b.nx + 1) * (b.ny + 1)];
            for j in 0..=b.ny {
                for i in 0..=b.nx {
                    let p = b.map(i as f64 / b.nx as f64, j as f64 / b.ny as f64);
                    ids[j * (b.nx + 1) + i] = vertex_id(p, &mut vertices);
                }
            }
            for j in 0..b.ny {
                for i in 0..b.nx {
                    let r = b.nx + 1;
                    cells.push([
                        ids[j * r + i],
                        ids[j * r + i + 1],
                        ids[(j + 1) * r + i + 1],
                        ids[(j + 1) * r + i],
                    ]);
                }
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = vec![[usize::MAX; 4]; cells.len()];
        let mut by_key: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, c) in cells.iter().enumerate() {
            for f in 0..4 {
                let (a, b) = (c[f], c[(f + 1) % 4]);
                let key = (a.min(b), a.max(b));
                if let Some(&e) = by_key.get(&key) {
                    let edge: &mut Edge = &mut edges[e];
                    if edge.plus.is_some() {
                        return Err(Error::InvalidDomain(format!(
                            "edge ({a}, {b}) shared by more than two cells"
                        )));
                    }
                    edge.plus = Some(k);
                    edge.faces[1] = f;
                    edge.class = EdgeClass::Interior;
                    cell_edges[k][f] = e;
                } else {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let len = dist(pa, pb);
                    // outward normal of a counter-clockwise cell
                    let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                    edges.push(Edge {
                        minus: k,
                        plus: None,
                        faces: [f, usize::MAX],
                        vertices: [a, b],
                        normal,
                        length: len,
                        class: EdgeClass::Free,
                    });
                    by_key.insert(key, edges.len() - 1);
                    cell_edges[k][f] = edges.len() - 1;
                }
            }
        }
        for e in edges.iter_mut().filter(|e| e.plus.is_none()) {
            let (pa, pb) = (vertices[e.vertices[0]], vertices[e.vertices[1]]);
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            e.class = if dirichlet.contains(mid) {
                EdgeClass::Dirichlet
            } else {
                EdgeClass::Free
            };
        }
        let cell_diameters = cells
            .iter()
            .map(|c| {
                let mut d: f64 = 0.0;
                for i in 0..4 {
                    for j in i + 1..4 {
                        d = d.max(dist(vertices[c[i]], vertices[c[j]]));
                    }
                }
                d
            })
            .collect();

        Ok(Self {
            vertices,
            cells,
            cell_edges,
            edges,
            cell_diameters,
            blocks,
            dirichlet,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 4] {
        let c = self.cells[cell];
        [
            self.vertices[c[0]],
            self.vertices[c[1]],
            self.vertices[c[2]],
            self.vertices[c[3]],
        ]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge indices of a cell's four faces.
    pub fn cell_edges(&self, cell: usize) -> [usize; 4] {
        self.cell_edges[cell]
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        self.cell_diameters[cell]
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    pub fn min_max_diameter(&self) -> (f64, f64) {
        self.cell_diameters
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            })
    }

    pub fn dirichlet_region(&self) -> &BoundaryRegion {
        &self.dirichlet
    }

    /// True when `v0 - v1 + v2 - v3` vanishes, i.e. the bilinear map is affine.
    pub fn is_affine(&self, cell: usize) -> bool {
        let v = self.cell_vertices(cell);
        let scale = self.cell_diameters[cell];
        (0..2).all(|d| (v[0][d] - v[1][d] + v[2][d] - v[3][d]).abs() <= 1e-12 * scale)
    }

    /// Area of a cell (shoelace formula; exact for bilinear quadrilaterals).
    pub fn cell_area(&self, cell: usize) -> f64 {
        let v = self.cell_vertices(cell);
        let mut s = 0.0;
        for i in 0..4 {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        (0..self.num_cells()).map(|k| self.cell_area(k)).sum()
    }

    pub fn skeleton(&self) -> Skeleton {
        let mut sk = Skeleton::default();
        for (i, e) in self.edges.iter().enumerate() {
            match e.class {
                EdgeClass::Interior => {
                    sk.interior.push(i);
                    sk.active.push(i);
                }
                EdgeClass::Dirichlet => {
                    sk.dirichlet.push(i);
                    sk.active.push(i);
                }
                EdgeClass::Free => {}
            }
        }
        sk
    }

    pub fn has_dirichlet(&self) -> bool {
        self.edges.iter().any(|e| e.class == EdgeClass::Dirichlet)
    }

    /// Plain-text dump of vertices, connectivity and edge classes.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "cells {}", self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        writeln!(w, "edges {}", self.edges.len())?;
        for e in &self.edges {
            let plus = e.plus.map(|p| p as i64).unwrap_or(-1);
            writeln!(
                w,
                "{} {} {} {} {:?}",
                e.vertices[0], e.vertices[1], e.minus, plus, e.class
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_two_clamped_sides() {
        let region: BoundaryRegion = "x=0;y=0".parse().unwrap();
        let m = Mesh::rectangle((0.0, 4.0), (0.0, 4.0), 8, 8, region).unwrap();
        assert_eq!(m.num_cells(), 64);
        for k in 0..64 {
            assert!((m.cell_diameter(k) - 2f64.sqrt() / 2.0).abs() < 1e-14);
        }
        let sk = m.skeleton();
        assert_eq!(sk.dirichlet.len(), 16);
        assert_eq!(sk.interior.len(), 2 * 8 * 7);
        assert_eq!(sk.active.len(), sk.interior.len() + sk.dirichlet.len());
    }

    #[test]
    fn single_cell_has_only_free_edges() {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 1, 1, BoundaryRegion::None).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.num_edges(), 4);
        assert!(m.edges().iter().all(|e| e.class == EdgeClass::Free));
        assert!(m.skeleton().active.is_empty());
    }

    #[test]
    fn rectangle_with_1024_cells_has_expected_diameters() {
        let region: BoundaryRegion = "x=-2;x=2".parse().unwrap();
        let m = Mesh::rectangle((-2.0, 2.0), (-1.0, 1.0), 32, 32, region).unwrap();
        assert_eq!(m.num_cells(), 1024);
        let (lo, hi) = m.min_max_diameter();
        let d = (1.0f64 / 64.0 + 1.0 / 256.0).sqrt();
        assert!((lo - d).abs() < 1e-14 && (hi - d).abs() < 1e-14);
        assert_eq!(m.skeleton().dirichlet.len(), 64);
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let err = Mesh::rectangle((1.0, 1.0), (0.0, 1.0), 2, 2, BoundaryRegion::None);
        assert!(matches!(err, Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn coarse_disc_has_five_cells_and_four_boundary_edges() {
        let m = Mesh::disc(1.0, 5).unwrap();
        assert_eq!(m.num_cells(), 5);
        assert_eq!(m.edges().iter().filter(|e| e.is_boundary()).count(), 4);
        assert_eq!(m.num_edges(), 12);
        let r = m.uniform_refine().unwrap();
        assert_eq!(r.edges().iter().filter(|e| e.is_boundary()).count(), 8);
    }

    #[test]
    fn disc_320_diameter_range() {
        let m = Mesh::disc(1.0, 320).unwrap();
        let (lo, hi) = m.min_max_diameter();
        assert!((0.09..=0.12).contains(&lo), "min {lo}");
        assert!((0.19..=0.23).contains(&hi), "max {hi}");
    }

    #[test]
    fn disc_vertices_stay_inside_scaled_radius() {
        let m = Mesh::disc(2.0, 20).unwrap();
        assert_eq!(m.num_cells(), 20);
        assert!(m
            .vertices()
            .iter()
            .all(|v| (v[0] * v[0] + v[1] * v[1]).sqrt() <= 2.0 + 1e-12));
    }

    #[test]
    fn unreachable_disc_cell_count_is_rejected() {
        assert!(matches!(
            Mesh::disc(1.0, 30),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn refined_disc_boundary_vertices_on_circle() {
        let m = Mesh::disc(1.0, 5).unwrap().uniform_refine().unwrap();
        assert_eq!(m.num_cells(), 20);
        for e in m.edges().iter().filter(|e| e.is_boundary()) {
            for &v in &e.vertices {
                let p = m.vertices()[v];
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refinement_quadruples_cells_and_halves_diameter() {
        let m = Mesh::rectangle((0.0, 4.0), (0.0, 4.0), 8, 8, "x=0".parse().unwrap()).unwrap();
        let r = m.uniform_refine().unwrap();
        assert_eq!(r.num_cells(), 256);
        assert!((r.cell_diameter(0) - m.cell_diameter(0) / 2.0).abs() < 1e-14);
        assert_eq!(
            r.skeleton().dirichlet.len(),
            2 * m.skeleton().dirichlet.len()
        );
    }

    #[test]
    fn interior_normals_point_from_lower_to_higher_cell() {
        let m = Mesh::rectangle((0.0, 2.0), (0.0, 1.0), 2, 1, BoundaryRegion::None).unwrap();
        let e = m.edges().iter().find(|e| !e.is_boundary()).unwrap();
        assert_eq!((e.minus, e.plus), (0, Some(1)));
        assert!((e.normal[0] - 1.0).abs() < 1e-15 && e.normal[1].abs() < 1e-15);
    }

    #[test]
    fn boundary_region_round_trips_through_text() {
        let r: BoundaryRegion = "x=-2;x=2".parse().unwrap();
        assert_eq!(r.to_string().parse::<BoundaryRegion>().unwrap(), r);
        assert!(r.contains([2.0, 0.3]) && !r.contains([0.0, 1.0]));
    }

    #[test]
    fn area_is_exact_on_rectangle_and_converges_on_disc() {
        let m = Mesh::rectangle((-2.0, 2.0), (-1.0, 1.0), 5, 3, BoundaryRegion::None).unwrap();
        assert!((m.area() - 8.0).abs() < 1e-12);
        let mut d = Mesh::disc(1.0, 5).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..3 {
            d = d.uniform_refine().unwrap();
            let err = (d.area() - std::f64::consts::PI).abs();
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn shared_edges_agree_on_endpoints() {
        let m = Mesh::disc(1.0, 80).unwrap();
        for e in m.edges().iter().filter(|e| !e.is_boundary()) {
            let p = e.plus.unwrap();
            let fp = e.faces[1];
            let c = m.cells()[p];
            let (a, b) = (c[fp], c[(fp + 1) % 4]);
            assert_eq!((a, b), (e.vertices[1], e.vertices[0]));
        }
    }
}
