//! Property suite run by `ldg-plates verify` and by the acceptance tests.
//!
//! Every check reports a residual and the tolerance it is held to.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fe_space::{interpolate, BoundaryData, BrokenField, BrokenSpace, JumpSet, VectorFn};
use crate::flows::{gradient_flow, metric_preprocess, FlowParams, FlowState, Problem};
use crate::forms::{assemble_constraint, MaterialParams};
use crate::lifting::{build_hessian_cache, lift_b, lift_r, LiftingSpace, LocalLifting};
use crate::mesh::{Axis, BoundaryRegion, Mesh};
use crate::metrics::{
    self, bending_density, catenoid_helicoid_jet, gauss_curvature, sample_grid, EtaProfile,
};
use crate::solvers::{saddle_solve, CsrMatrix, Factorization};
use crate::Mat2;

/// Outcome of one property check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }

    fn from_result(name: &str, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(v) => Self::new(name, v, tolerance),
            Err(e) => {
                log::error!("{name}: {e}");
                Self::new(name, f64::INFINITY, tolerance)
            }
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<48} residual {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tolerance
        )
    }
}

fn rect_space(n: usize, region: BoundaryRegion) -> Result<Arc<BrokenSpace>> {
    let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), n, n, region)?;
    Ok(Arc::new(BrokenSpace::new(Arc::new(m), 2)?))
}

/// Lifting operator of a scalar jump, as [`lift_b`].
pub type ScalarLift<'a> = &'a dyn Fn(&LiftingSpace, usize, &[f64]) -> Result<LocalLifting>;

/// Largest relative residual of the adjoint identities
/// `int r_e(phi) : tau = int_e {tau} : (phi (x) n)` and
/// `int b_e(phi) : tau = int_e {div tau} . n phi`
/// over every edge of a small mesh with random `phi` and `tau`.
pub fn lifting_adjoint_residual(lift: ScalarLift<'_>, seed: u64) -> Result<f64> {
    let space = Arc::new(BrokenSpace::new(Arc::new(Mesh::disc(1.0, 20)?), 2)?);
    let lifting = LiftingSpace::matching(&space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let nb = lifting.r_space().dofs_per_cell();
    let nc = space.mesh().num_cells();
    for e in 0..space.mesh().num_edges() {
        // random tau, one matrix coefficient per scalar basis function
        let tau: Vec<Mat2> = (0..nc * nb)
            .map(|_| {
                Mat2::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let np = space.num_edge_points();
        let jv: Vec<[f64; 2]> = (0..np)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let js: Vec<f64> = (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (kind, lifted) in [
            ("r", lift_r(&lifting, e, &jv)?),
            ("b", lift(&lifting, e, &js)?),
        ] {
            let sp = if kind == "r" {
                lifting.r_space()
            } else {
                lifting.b_space()
            };
            let mut lhs = 0.0;
            for (pi, part) in lifted.parts.iter().enumerate() {
                let vals = lifted.values_at_quad(&lifting, pi);
                let phi = sp.phi(part.cell);
                for (q, (v, w)) in vals.iter().zip(sp.jxw(part.cell)).enumerate() {
                    let mut t = Mat2::zero();
                    for j in 0..nb {
                        t += tau[part.cell * nb + j].scale(phi[q * nb + j]);
                    }
                    lhs += w * v.ddot(&t);
                }
            }
            let ed = sp.edge(e);
            let avg = ed.average_weight();
            let n = ed.normal;
            let mut rhs = 0.0;
            for side in &ed.sides {
                for p in 0..np {
                    let mut t = Mat2::zero();
                    let mut div = [0.0; 2];
                    for j in 0..nb {
                        let c = tau[side.cell * nb + j];
                        t += c.scale(side.phi[p * nb + j]);
                        let d = side.dphi[p * nb + j];
                        for a in 0..2 {
                            div[a] += c.m[a][0] * d[0] + c.m[a][1] * d[1];
                        }
                    }
                    let w = avg * ed.weights[p];
                    rhs += w * if kind == "r" {
                        (0..2)
                            .map(|a| (0..2).map(|b| t.m[a][b] * jv[p][a] * n[b]).sum::<f64>())
                            .sum::<f64>()
                    } else {
                        (div[0] * n[0] + div[1] * n[1]) * js[p]
                    };
                }
            }
            worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    Ok(worst)
}

/// `max |H_h[y] - D^2 y|` for a global quadratic `y` with exact boundary
/// data on a clamped mesh.
pub fn quadratic_hessian_residual() -> Result<f64> {
    let space = rect_space(
        3,
        BoundaryRegion::Lines(vec![(Axis::X, 0.0), (Axis::Y, 1.0)]),
    )?;
    let lifting = LiftingSpace::matching(&space)?;
    let f = |x: [f64; 2]| {
        [
            x[0] * x[0] + 0.5 * x[0] * x[1],
            x[1] * x[1] - x[0],
            3.0 * x[0] * x[1] + x[1],
        ]
    };
    let h = [
        Mat2::sym(2.0, 0.5, 0.0),
        Mat2::sym(0.0, 0.0, 2.0),
        Mat2::sym(0.0, 3.0, 0.0),
    ];
    let bd = BoundaryData::new(f, |x| {
        [
            [2.0 * x[0] + 0.5 * x[1], 0.5 * x[0]],
            [-1.0, 2.0 * x[1]],
            [3.0 * x[1], 3.0 * x[0] + 1.0],
        ]
    });
    let rules = JumpSet::standard(space.mesh());
    let cache = build_hessian_cache(&space, &lifting, &rules, Some(&bd))?;
    let y = interpolate(&space, f, Some(bd));
    let mut worst = 0.0f64;
    for c in 0..space.mesh().num_cells() {
        for hq in cache.hessian(y.coeffs(), c) {
            for k in 0..3 {
                worst = worst.max((hq[k] - h[k]).norm());
            }
        }
    }
    Ok(worst)
}

fn random_field(
    space: &Arc<BrokenSpace>,
    rng: &mut ChaCha8Rng,
    bd: Option<BoundaryData>,
) -> Result<BrokenField> {
    let c = (0..space.vector_dofs())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    BrokenField::from_coeffs(space.clone(), c, bd)
}

/// Relative error of
/// `E_h[y + v] = E_h[y] + (v^T A y - L . v - F . v) + 1/2 v^T A v`
/// with all energies evaluated by direct quadrature.
pub fn quadratic_expansion_residual(seed: u64) -> Result<f64> {
    let mesh = Arc::new(Mesh::rectangle(
        (0.0, 1.0),
        (-1.0, 1.0),
        3,
        4,
        "x=0".parse()?,
    )?);
    let f: VectorFn = Arc::new(|x| [0.1, -0.2 * x[0], 0.3 * x[1]]);
    let p = Problem::new(
        mesh,
        metrics::catenoid_helicoid(0.3),
        MaterialParams::default(),
        Some(f),
        None,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = random_field(&p.space, &mut rng, p.boundary.clone())?;
    let v = random_field(&p.space, &mut rng, p.boundary.clone())?;
    let sum = p.field(
        y.coeffs()
            .iter()
            .zip(v.coeffs())
            .map(|(a, b)| a + b)
            .collect(),
    )?;
    let ay = p.bending.apply(y.coeffs());
    let av = p.bending.apply(v.coeffs());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let first = dot(v.coeffs(), &ay) - dot(&p.bending.data, v.coeffs()) - dot(&p.load, v.coeffs());
    let predicted = p.energy_direct(&y)? + first + 0.5 * dot(v.coeffs(), &av);
    let actual = p.energy_direct(&sum)?;
    Ok((actual - predicted).abs() / actual.abs().max(1.0))
}

/// Largest energy increase along a flow history (negative when every step
/// decreased the energy), relative to `max(1, |E|)`.
pub fn max_energy_increase(start: f64, state: &FlowState) -> f64 {
    let mut prev = start;
    let mut worst = f64::NEG_INFINITY;
    for r in &state.history {
        worst = worst.max((r.energy - prev) / prev.abs().max(1.0));
        prev = r.energy;
    }
    worst
}

/// Largest violation of `D_{n+1} <= D_n + sum |int grad dy^T grad dy| + c_lin`
/// recomputed from the stored iterates of a short flow.
fn defect_expansion_violation(
    p: &Problem,
    y0: BrokenField,
    params: &FlowParams,
) -> Result<(f64, f64)> {
    let mut y = y0;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_decay = f64::NEG_INFINITY;
    for _ in 0..params.max_steps {
        let one = FlowParams {
            max_steps: 1,
            ..*params
        };
        let e0 = p.energy(y.coeffs());
        let st = gradient_flow(p, y.clone(), &one, None)?;
        if st.n == 0 {
            break;
        }
        let dy = p.field(
            st.y.coeffs()
                .iter()
                .zip(y.coeffs())
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        let bound = p.defect(&y)
            + crate::forms::quadratic_defect(&dy)
            + crate::forms::linearized_defect(&y, &dy);
        worst_bound = worst_bound.max(st.defect - bound);
        worst_decay = worst_decay.max(max_energy_increase(e0, &st));
        y = st.y;
    }
    Ok((worst_decay, worst_bound))
}

/// Energy decay and defect expansion on short runs of a clamped and a free
/// problem. Returns `(max relative energy increase, max bound violation)`.
pub fn flow_invariants() -> Result<(f64, f64)> {
    let mut decay = f64::NEG_INFINITY;
    let mut bound = f64::NEG_INFINITY;
    let vl = crate::presets::preset("vertical_load", Some(2))?;
    let p = vl.problem()?;
    let params = FlowParams {
        max_steps: 6,
        ..vl.flow
    };
    let (d, b) = defect_expansion_violation(&p, p.identity(), &params)?;
    decay = decay.max(d);
    bound = bound.max(b);

    let mesh = Arc::new(Mesh::disc(1.0, 20)?);
    let mat = MaterialParams {
        sigma: 1.0,
        ..MaterialParams::default()
    };
    let p = Problem::new(mesh, metrics::hyperbolic_paraboloid(), mat, None, None)?;
    let y0 = interpolate(
        &p.space,
        |x| [x[0], x[1], 0.2 * x[0] * x[1] + 0.05 * x[0]],
        None,
    );
    let params = FlowParams {
        tau: 0.01,
        max_steps: 6,
        ..FlowParams::default()
    };
    let (d, b) = defect_expansion_violation(&p, y0, &params)?;
    Ok((decay.max(d), bound.max(b)))
}

/// Residuals of the alternative-energy identity for the cylinder and
/// catenoid immersions.
pub fn alternative_energy_residual() -> Result<f64> {
    let mut worst = 0.0f64;
    let cyl = metrics::one_mode();
    let (a, b) =
        metrics::verify_alternative_energy(&cyl, &sample_grid((-2.0, 2.0), (-1.0, 1.0), 12))?;
    worst = worst.max(a).max(b);
    let cat = metrics::catenoid_helicoid(PI / 2.0);
    let (a, b) =
        metrics::verify_alternative_energy(&cat, &sample_grid((0.0, 6.25), (-1.0, 1.0), 12))?;
    Ok(worst.max(a).max(b))
}

/// Spread of the bending density over the catenoid-helicoid family.
pub fn alpha_independence_residual() -> Result<f64> {
    let metric = metrics::catenoid_helicoid(0.0);
    let mut worst = 0.0f64;
    for x in sample_grid((0.0, 6.0), (-1.0, 1.0), 8) {
        let base = bending_density(&metric, &catenoid_helicoid_jet(0.0, x), x, 8.0, 6.0)?;
        for i in 1..=8 {
            let alpha = PI / 2.0 * i as f64 / 8.0;
            let d = bending_density(&metric, &catenoid_helicoid_jet(alpha, x), x, 8.0, 6.0)?;
            worst = worst.max((d - base).abs());
        }
    }
    Ok(worst)
}

/// Gaussian curvature of the gel profiles at sample radii, `[K = 2, K = -2, flat]`.
pub fn gel_curvatures() -> Result<[Vec<f64>; 3]> {
    let radii: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
    let eval = |p: EtaProfile| -> Result<Vec<f64>> {
        radii.iter().map(|&r| gauss_curvature(&p, r)).collect()
    };
    Ok([
        eval(EtaProfile::constant_curvature(2.0)?)?,
        eval(EtaProfile::constant_curvature(-2.0)?)?,
        eval(EtaProfile::euclidean())?,
    ])
}

fn curvature_residual() -> Result<f64> {
    let [p, n, z] = gel_curvatures()?;
    let mut worst = 0.0f64;
    for v in p {
        worst = worst.max((v - 2.0).abs());
    }
    for v in n {
        worst = worst.max((v + 2.0).abs());
    }
    for v in z {
        worst = worst.max(v.abs());
    }
    Ok(worst)
}

/// Dense LU solve of the full saddle system, the oracle of the Schur solver.
pub fn dense_saddle_solve(a: &CsrMatrix, b: &CsrMatrix, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ns = a.nrows();
    let n = f.len();
    let m = b.nrows();
    if !n.is_multiple_of(ns) || b.ncols() != n {
        return Err(Error::InvalidParameter(
            "inconsistent saddle system sizes".into(),
        ));
    }
    let ad = a.to_dense();
    let bd = b.to_dense();
    let k = faer::Mat::<f64>::from_fn(n + m, n + m, |i, j| {
        if i < n && j < n {
            if i / ns == j / ns {
                ad[(i % ns) * ns + j % ns]
            } else {
                0.0
            }
        } else if i < n {
            bd[(j - n) * n + i]
        } else if j < n {
            bd[(i - n) * n + j]
        } else {
            0.0
        }
    });
    let rhs = faer::Mat::<f64>::from_fn(n + m, 1, |i, _| if i < n { f[i] } else { 0.0 });
    let x = k.partial_piv_lu().solve(&rhs);
    Ok((
        (0..n).map(|i| x[(i, 0)]).collect(),
        (n..n + m).map(|i| x[(i, 0)]).collect(),
    ))
}

/// `max |dY_schur - dY_dense|` on a four-cell mesh with a random current
/// iterate and right-hand side.
pub fn saddle_oracle_residual(seed: u64) -> Result<f64> {
    let mesh = Arc::new(Mesh::rectangle(
        (0.0, 1.0),
        (0.0, 1.0),
        2,
        2,
        "x=0".parse()?,
    )?);
    let p = Problem::new(
        mesh,
        metrics::identity(),
        MaterialParams::default(),
        None,
        None,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = interpolate(
        &p.space,
        |x| {
            [
                x[0] + 0.1 * x[1] * x[1],
                x[1] - 0.2 * x[0] * x[1],
                0.3 * x[0] * x[0],
            ]
        },
        p.boundary.clone(),
    );
    let a = CsrMatrix::linear_combination(10.0, &p.h2, 1.0, &p.bending.matrix);
    let b = assemble_constraint(&y);
    let f: Vec<f64> = (0..p.space.vector_dofs())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let factor = Factorization::new(&a)?;
    let (dy, _) = saddle_solve(&factor, &b, &f, 1e-13, 10 * b.nrows())?;
    let (dense, _) = dense_saddle_solve(&a, &b, &f)?;
    Ok(dy
        .iter()
        .zip(&dense)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// `max |y_3|` after ten metric-preprocessing steps from the flat identity
/// for a metric without flat immersion.
pub fn flat_invariance_residual() -> Result<f64> {
    let mesh = Arc::new(Mesh::disc(1.0, 20)?);
    let mat = MaterialParams {
        sigma: 1.0,
        ..MaterialParams::default()
    };
    let p = Problem::new(mesh, metrics::bubble(0.2)?, mat, None, None)?;
    let params = FlowParams {
        max_steps: 10,
        eps0_pp: 1e-12,
        tol_pp: 1e-14,
        ..FlowParams::default()
    };
    let st = metric_preprocess(&p, p.identity(), &params, None)?;
    let ns = p.space.scalar_dofs();
    Ok(st.y.coeffs()[2 * ns..]
        .iter()
        .fold(0.0, |m, v| m.max(v.abs())))
}

/// Runs every check.
pub fn run_suite() -> Vec<Check> {
    let mut out = vec![
        Check::from_result(
            "lifting adjoint identities",
            1e-11,
            lifting_adjoint_residual(&lift_b, 7),
        ),
        Check::from_result(
            "zero-jump Hessian of a global quadratic",
            1e-12,
            quadratic_hessian_residual(),
        ),
        Check::from_result(
            "quadratic energy expansion",
            1e-10,
            quadratic_expansion_residual(11),
        ),
    ];
    match flow_invariants() {
        Ok((decay, bound)) => {
            out.push(Check::new(
                "per-step energy decay (max rel. increase)",
                decay.max(0.0),
                1e-12,
            ));
            out.push(Check::new(
                "per-step defect expansion bound",
                bound.max(0.0),
                1e-12,
            ));
        }
        Err(e) => {
            log::error!("flow invariants: {e}");
            out.push(Check::new(
                "per-step energy decay (max rel. increase)",
                f64::INFINITY,
                1e-12,
            ));
            out.push(Check::new(
                "per-step defect expansion bound",
                f64::INFINITY,
                1e-12,
            ));
        }
    }
    out.push(Check::from_result(
        "alternative energy identity (cylinder, catenoid)",
        1e-9,
        alternative_energy_residual(),
    ));
    out.push(Check::from_result(
        "alpha-independence of the bending density",
        1e-9,
        alpha_independence_residual(),
    ));
    out.push(Check::from_result(
        "Gaussian curvature of gel profiles",
        1e-10,
        curvature_residual(),
    ));
    out.push(Check::from_result(
        "saddle solver vs dense KKT",
        1e-8,
        saddle_oracle_residual(5),
    ));
    out.push(Check::from_result(
        "flat preprocessing stays flat",
        1e-12,
        flat_invariance_residual(),
    ));
    out
}
