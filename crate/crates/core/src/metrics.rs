//! Target metrics, reference immersions and differential-geometry checks.
//!
//! A [`TargetMetric`] carries the SPD field `g`, optionally its analytic
//! derivatives, an exact immersion `y` with `grad y^T grad y = g` and, for
//! radially symmetric prestrains, the polar profile `eta` with
//! `g~(r, theta) = diag(1, eta(r)^2)`.
//!
//! [`verify_alternative_energy`] evaluates both sides of
//!
//! ```text
//! |a D^2 y a|^2 = |a II a|^2 + f_1,     |tr(a D^2 y a)|^2 = tr(a II a)^2 + f_2,
//! ```
//!
//! with `a = g^{-1/2}`, `II_ij = d_ij y . nu`, Christoffel symbols
//! `Gamma^l_ij = 1/2 sum_m (g^{-1})_lm (d_i g_jm + d_j g_im - d_m g_ij)` and
//!
//! ```text
//! f_ij = sum_{l1,l2} g_{l1 l2} sum_{m1,m2,n1,n2} a_{i m1} a_{i m2}
//!        Gamma^{l1}_{m1 n1} Gamma^{l2}_{m2 n2} a_{n1 j} a_{n2 j},   f_1 = sum_ij f_ij,
//! f_2  = sum_{l1,l2} g_{l1 l2} sum_{i1,i2,m1,m2,n1,n2} a_{i1 m1} a_{i2 m2}
//!        Gamma^{l1}_{m1 n1} Gamma^{l2}_{m2 n2} a_{n1 i1} a_{n2 i2}.
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::BoundaryData;
use crate::mesh::Point;
use crate::Mat2;

/// Value, gradient rows and Hessians of a map `R^2 -> R^3`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: [f64; 3],
    /// Row `k` is `grad y_k`.
    pub grad: [[f64; 2]; 3],
    pub hess: [Mat2; 3],
}

impl Jet {
    /// First fundamental form `grad y^T grad y`.
    pub fn first_fundamental_form(&self) -> Mat2 {
        let mut g = Mat2::zero();
        for k in 0..3 {
            g += Mat2::outer(self.grad[k], self.grad[k]);
        }
        g
    }

    /// Tangent vector `d_j y`.
    pub fn tangent(&self, j: usize) -> [f64; 3] {
        [self.grad[0][j], self.grad[1][j], self.grad[2][j]]
    }

    /// `d_ij y`
    pub fn second(&self, i: usize, j: usize) -> [f64; 3] {
        [
            self.hess[0].m[i][j],
            self.hess[1].m[i][j],
            self.hess[2].m[i][j],
        ]
    }

    /// Graph jet `(x1, x2, f)` from `f` and its derivatives.
    pub fn graph(x: Point, f: f64, grad: [f64; 2], hess: Mat2) -> Self {
        Self {
            value: [x[0], x[1], f],
            grad: [[1.0, 0.0], [0.0, 1.0], grad],
            hess: [Mat2::zero(), Mat2::zero(), hess],
        }
    }
}

/// Polar partial derivatives `(f, f_r, f_theta, f_rr, f_rtheta, f_thetatheta)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolarDerivatives {
    pub f: f64,
    pub r: f64,
    pub t: f64,
    pub rr: f64,
    pub rt: f64,
    pub tt: f64,
}

/// Below this radius polar formulas are evaluated at a nearby point.
const ORIGIN_RADIUS: f64 = 1e-10;

fn polar(x: Point) -> (f64, f64) {
    let r = x[0].hypot(x[1]);
    let theta = if r > 0.0 { x[1].atan2(x[0]) } else { 0.0 };
    (r, theta)
}

/// Cartesian value, gradient and Hessian of a function given in polar
/// coordinates.
///
/// `grad f = f_r e_r + f_t / r e_t`,
/// `D^2 f = f_rr e_r e_r^T + (f_rt / r - f_t / r^2)(e_r e_t^T + e_t e_r^T)
///         + (f_tt / r^2 + f_r / r) e_t e_t^T`.
pub fn polar_to_cartesian(r: f64, theta: f64, d: PolarDerivatives) -> (f64, [f64; 2], Mat2) {
    let (s, c) = theta.sin_cos();
    let er = [c, s];
    let et = [-s, c];
    let grad = [d.r * c - d.t / r * s, d.r * s + d.t / r * c];
    let mixed = d.rt / r - d.t / (r * r);
    let hess = Mat2::outer(er, er).scale(d.rr)
        + (Mat2::outer(er, et) + Mat2::outer(et, er)).scale(mixed)
        + Mat2::outer(et, et).scale(d.tt / (r * r) + d.r / r);
    (d.f, grad, hess)
}

/// Pulls a polar metric `g~(r, theta)` back to Cartesian coordinates:
/// `g = J^{-T} g~ J^{-1}` with `J = d(x1, x2)/d(r, theta)`.
pub fn polar_pullback_matrix(gt: Mat2, r: f64, theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    // J^{-1} = [[c, s], [-s / r, c / r]]
    let jinv = Mat2::new(c, s, -s / r, c / r);
    jinv.transpose() * gt * jinv
}

/// Radial profile `eta` with its first two derivatives.
#[derive(Clone)]
pub struct EtaProfile {
    eval: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
    label: String,
}

impl fmt::Debug for EtaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EtaProfile({})", self.label)
    }
}

impl EtaProfile {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            label: label.into(),
        }
    }

    /// `eta(r) = r`.
    pub fn euclidean() -> Self {
        Self::new("r", |r| [r, 1.0, 0.0])
    }

    /// Constant curvature `K`: `sin(sqrt(K) r)/sqrt(K)` or
    /// `sinh(sqrt(-K) r)/sqrt(-K)`.
    pub fn constant_curvature(k: f64) -> Result<Self> {
        if k > 0.0 {
            let s = k.sqrt();
            Ok(Self::new(format!("sin(sqrt({k}) r)"), move |r| {
                [(s * r).sin() / s, (s * r).cos(), -s * (s * r).sin()]
            }))
        } else if k < 0.0 {
            let s = (-k).sqrt();
            Ok(Self::new(format!("sinh(sqrt({}) r)", -k), move |r| {
                [(s * r).sinh() / s, (s * r).cosh(), s * (s * r).sinh()]
            }))
        } else {
            Err(Error::InvalidParameter(
                "constant-curvature profile needs K != 0".into(),
            ))
        }
    }

    /// `[eta, eta', eta'']` at `r`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        (self.eval)(r)
    }
}

/// Gaussian curvature `-eta''(r) / eta(r)` of `diag(1, eta^2)`.
pub fn gauss_curvature(profile: &EtaProfile, r: f64) -> Result<f64> {
    let [eta, _, d2] = profile.eval(r);
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::UndefinedCurvature { r });
    }
    Ok(-d2 / eta)
}

/// Length of the image of the circle of radius `r` under a metric, by
/// trapezoidal quadrature of `sqrt(gamma'^T g gamma')` (exact for
/// trigonometric integrands of low degree).
pub fn circle_image_length(metric: &TargetMetric, r: f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 * h;
            let (s, c) = t.sin_cos();
            let x = [r * c, r * s];
            let d = [-r * s, r * c];
            let g = metric.g(x);
            let v = g.mul_vec(d);
            (d[0] * v[0] + d[1] * v[1]).sqrt() * h
        })
        .sum()
}

type MetricFn = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;
type MetricDerivFn = Arc<dyn Fn(Point) -> [Mat2; 2] + Send + Sync>;
type ImmersionFn = Arc<dyn Fn(Point) -> Jet + Send + Sync>;

/// Step of the central differences used for metrics without analytic
/// derivatives.
pub const METRIC_FD_STEP: f64 = 1e-6;

/// Prescribed SPD metric with optional analytic data.
#[derive(Clone)]
pub struct TargetMetric {
    name: String,
    g: MetricFn,
    dg: Option<MetricDerivFn>,
    immersion: Option<ImmersionFn>,
    profile: Option<EtaProfile>,
}

impl fmt::Debug for TargetMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetMetric")
            .field("name", &self.name)
            .field("analytic_dg", &self.dg.is_some())
            .field("immersion", &self.immersion.is_some())
            .field("profile", &self.profile)
            .finish()
    }
}

impl TargetMetric {
    /// User metric; derivatives by central differences.
    pub fn new(name: impl Into<String>, g: impl Fn(Point) -> Mat2 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
            dg: None,
            immersion: None,
            profile: None,
        }
    }

    /// Metric with a compatible immersion; `d g` follows from the jet:
    /// `d_c g_ab = d_ca y . d_b y + d_a y . d_cb y`.
    pub fn with_immersion(mut self, y: impl Fn(Point) -> Jet + Send + Sync + 'static) -> Self {
        let y: ImmersionFn = Arc::new(y);
        let yc = y.clone();
        self.dg = Some(Arc::new(move |x| {
            let j = yc(x);
            let mut out = [Mat2::zero(); 2];
            for (c, o) in out.iter_mut().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        let mut v = 0.0;
                        for k in 0..3 {
                            v +=
                                j.hess[k].m[c][a] * j.grad[k][b] + j.grad[k][a] * j.hess[k].m[c][b];
                        }
                        o.m[a][b] = v;
                    }
                }
            }
            out
        }));
        self.immersion = Some(y);
        self
    }

    /// Metric `g~ = diag(1, eta^2)` pulled back from polar coordinates:
    /// `g = e_r e_r^T + (eta / r)^2 e_t e_t^T`, and `g(0) = I`.
    pub fn from_profile(name: impl Into<String>, profile: EtaProfile) -> Self {
        let p = profile.clone();
        let g = move |x: Point| {
            let (r, theta) = polar(x);
            if r < ORIGIN_RADIUS {
                return Mat2::identity();
            }
            let (s, c) = theta.sin_cos();
            let q = p.eval(r)[0] / r;
            Mat2::outer([c, s], [c, s]) + Mat2::outer([-s, c], [-s, c]).scale(q * q)
        };
        // g = I + q(r) [[x2^2, -x1 x2], [-x1 x2, x1^2]] with q = (eta^2 - r^2) / r^4
        let p = profile.clone();
        let dg = move |x: Point| {
            let r = x[0].hypot(x[1]);
            if r < 1e-6 {
                return [Mat2::zero(); 2];
            }
            let [eta, d1, _] = p.eval(r);
            let r2 = r * r;
            let q = (eta * eta - r2) / (r2 * r2);
            let dq =
                (2.0 * eta * d1 - 2.0 * r) / (r2 * r2) - 4.0 * (eta * eta - r2) / (r2 * r2 * r);
            let m = Mat2::sym(x[1] * x[1], -x[0] * x[1], x[0] * x[0]);
            let dm = [
                Mat2::sym(0.0, -x[1], 2.0 * x[0]),
                Mat2::sym(2.0 * x[1], -x[0], 0.0),
            ];
            [
                m.scale(dq * x[0] / r) + dm[0].scale(q),
                m.scale(dq * x[1] / r) + dm[1].scale(q),
            ]
        };
        Self {
            name: name.into(),
            g: Arc::new(g),
            dg: Some(Arc::new(dg)),
            immersion: None,
            profile: Some(profile),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, x: Point) -> Mat2 {
        (self.g)(x)
    }

    /// `g^{-1/2}`; errors if `g` is not SPD at `x`.
    pub fn inv_sqrt(&self, x: Point) -> Result<Mat2> {
        let g = self.g(x);
        let sym = (g.m[0][1] - g.m[1][0]).abs() <= 1e-12 * (1.0 + g.norm());
        match g.inv_sqrt_spd() {
            Some(a) if sym && a.is_finite() => Ok(a),
            _ => Err(Error::InvalidMetric { x: x[0], y: x[1] }),
        }
    }

    /// `[d_1 g, d_2 g]`, analytic when available.
    pub fn dg(&self, x: Point) -> [Mat2; 2] {
        if let Some(d) = &self.dg {
            return d(x);
        }
        let h = METRIC_FD_STEP;
        let mut out = [Mat2::zero(); 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            *o = (self.g(xp) - self.g(xm)).scale(0.5 / h);
        }
        out
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.dg.is_some()
    }

    pub fn immersion(&self, x: Point) -> Option<Jet> {
        self.immersion.as_ref().map(|y| y(x))
    }

    pub fn has_immersion(&self) -> bool {
        self.immersion.is_some()
    }

    pub fn profile(&self) -> Option<&EtaProfile> {
        self.profile.as_ref()
    }

    /// Dirichlet data `(y, grad y)` of the immersion.
    pub fn boundary_data(&self) -> Option<BoundaryData> {
        let y = self.immersion.clone()?;
        let yg = y.clone();
        Some(BoundaryData::new(move |x| y(x).value, move |x| yg(x).grad))
    }

    /// Smallest eigenvalue of `g` over sample points.
    pub fn min_eigenvalue(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .map(|&x| self.g(x).sym_eigenvalues()[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Parameters of catalog entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    /// Bubble amplitude, or the angle of the catenoid-helicoid immersion.
    pub alpha: Option<f64>,
    /// Gaussian curvature `K` of gel discs.
    pub curvature: Option<f64>,
}

/// Catalog entries.
pub const CATALOG: &[&str] = &[
    "identity",
    "one_mode",
    "two_modes",
    "catenoid_helicoid",
    "bubble",
    "hyperbolic_paraboloid",
    "oscillating_boundary",
    "gel_disc",
];

/// Builds a catalog metric.
pub fn catalog(name: &str, params: MetricParams) -> Result<TargetMetric> {
    match name {
        "identity" => Ok(identity()),
        "one_mode" => Ok(one_mode()),
        "two_modes" => Ok(two_modes()),
        "catenoid_helicoid" => Ok(catenoid_helicoid(params.alpha.unwrap_or(PI / 2.0))),
        "bubble" => bubble(params.alpha.unwrap_or(0.2)),
        "hyperbolic_paraboloid" => Ok(hyperbolic_paraboloid()),
        "oscillating_boundary" => Ok(oscillating_boundary()),
        "gel_disc" => gel_disc(params.curvature.unwrap_or(2.0)),
        _ => Err(Error::UnknownMetric(name.to_string())),
    }
}

pub fn identity() -> TargetMetric {
    TargetMetric::new("identity", |_| Mat2::identity())
        .with_immersion(|x| Jet::graph(x, 0.0, [0.0, 0.0], Mat2::zero()))
}

/// `g_11 = 1 + pi^2/4 cos^2(pi/4 (x1 + 2))`, `y3 = 2 sin(pi/4 (x1 + 2))`.
pub fn one_mode() -> TargetMetric {
    let w = PI / 4.0;
    TargetMetric::new("one_mode", move |x| {
        let c = (w * (x[0] + 2.0)).cos();
        Mat2::diag(1.0 + PI * PI / 4.0 * c * c, 1.0)
    })
    .with_immersion(move |x| {
        let t = w * (x[0] + 2.0);
        Jet::graph(
            x,
            2.0 * t.sin(),
            [2.0 * w * t.cos(), 0.0],
            Mat2::diag(-2.0 * w * w * t.sin(), 0.0),
        )
    })
}

/// `y3 = 2 sin(pi/4 (x1 + 2)) + 1/2 sin(5 pi/4 (x1 + 2))`.
pub fn two_modes() -> TargetMetric {
    let (w1, w2) = (PI / 4.0, 5.0 * PI / 4.0);
    TargetMetric::new("two_modes", move |x| {
        let s = x[0] + 2.0;
        let d = PI / 2.0 * (w1 * s).cos() + 5.0 * PI / 8.0 * (w2 * s).cos();
        Mat2::diag(1.0 + d * d, 1.0)
    })
    .with_immersion(move |x| {
        let s = x[0] + 2.0;
        Jet::graph(
            x,
            2.0 * (w1 * s).sin() + 0.5 * (w2 * s).sin(),
            [2.0 * w1 * (w1 * s).cos() + 0.5 * w2 * (w2 * s).cos(), 0.0],
            Mat2::diag(
                -2.0 * w1 * w1 * (w1 * s).sin() - 0.5 * w2 * w2 * (w2 * s).sin(),
                0.0,
            ),
        )
    })
}

/// `g = cosh^2(x2) I` with the immersion `cos(alpha) y_bar + sin(alpha) y_tilde`.
pub fn catenoid_helicoid(alpha: f64) -> TargetMetric {
    TargetMetric::new("catenoid_helicoid", |x| {
        let c = x[1].cosh();
        Mat2::diag(c * c, c * c)
    })
    .with_immersion(move |x| catenoid_helicoid_jet(alpha, x))
}

/// Jet of `y^alpha = cos(alpha) y_bar + sin(alpha) y_tilde`.
pub fn catenoid_helicoid_jet(alpha: f64, x: Point) -> Jet {
    let (s1, c1) = x[0].sin_cos();
    let (sh, ch) = (x[1].sinh(), x[1].cosh());
    // y_bar = (sinh x2 sin x1, -sinh x2 cos x1, x1)
    let bar = Jet {
        value: [sh * s1, -sh * c1, x[0]],
        grad: [[sh * c1, ch * s1], [sh * s1, -ch * c1], [1.0, 0.0]],
        hess: [
            Mat2::sym(-sh * s1, ch * c1, sh * s1),
            Mat2::sym(sh * c1, ch * s1, -sh * c1),
            Mat2::zero(),
        ],
    };
    // y_tilde = (cosh x2 cos x1, cosh x2 sin x1, x2)
    let til = Jet {
        value: [ch * c1, ch * s1, x[1]],
        grad: [[-ch * s1, sh * c1], [ch * c1, sh * s1], [0.0, 1.0]],
        hess: [
            Mat2::sym(-ch * c1, -sh * s1, ch * c1),
            Mat2::sym(-ch * s1, sh * c1, ch * s1),
            Mat2::zero(),
        ],
    };
    let (sa, ca) = alpha.sin_cos();
    let mut j = Jet::default();
    for k in 0..3 {
        j.value[k] = ca * bar.value[k] + sa * til.value[k];
        for d in 0..2 {
            j.grad[k][d] = ca * bar.grad[k][d] + sa * til.grad[k][d];
        }
        j.hess[k] = bar.hess[k].scale(ca) + til.hess[k].scale(sa);
    }
    j
}

fn nudge(x: Point) -> Point {
    if x[0].hypot(x[1]) < ORIGIN_RADIUS {
        [ORIGIN_RADIUS, 0.0]
    } else {
        x
    }
}

/// Cartesian jet of a polar scalar function.
fn polar_scalar(x: Point, f: impl Fn(f64, f64) -> PolarDerivatives) -> (f64, [f64; 2], Mat2) {
    let (r, theta) = polar(nudge(x));
    polar_to_cartesian(r, theta, f(r, theta))
}

/// `y3 = sqrt(alpha) sin(pi/2 (1 - r))`.
pub fn bubble(alpha: f64) -> Result<TargetMetric> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bubble amplitude must be positive, got {alpha}"
        )));
    }
    let sa = alpha.sqrt();
    Ok(TargetMetric::new("bubble", move |x| {
        let r = x[0].hypot(x[1]);
        if r < ORIGIN_RADIUS {
            return Mat2::identity();
        }
        let c = (PI / 2.0 * (1.0 - r)).cos();
        let k = alpha * PI * PI / 4.0 * c * c / (r * r);
        Mat2::new(
            1.0 + k * x[0] * x[0],
            k * x[0] * x[1],
            k * x[0] * x[1],
            1.0 + k * x[1] * x[1],
        )
    })
    .with_immersion(move |x| {
        let (f, g, h) = polar_scalar(x, |r, _| {
            let t = PI / 2.0 * (1.0 - r);
            PolarDerivatives {
                f: sa * t.sin(),
                r: -sa * PI / 2.0 * t.cos(),
                rr: -sa * PI * PI / 4.0 * t.sin(),
                ..Default::default()
            }
        });
        Jet::graph(x, f, g, h)
    }))
}

/// `g = [[1 + x2^2, x1 x2], [x1 x2, 1 + x1^2]]`, `y3 = x1 x2`.
pub fn hyperbolic_paraboloid() -> TargetMetric {
    TargetMetric::new("hyperbolic_paraboloid", |x| {
        Mat2::sym(1.0 + x[1] * x[1], x[0] * x[1], 1.0 + x[0] * x[0])
    })
    .with_immersion(|x| Jet::graph(x, x[0] * x[1], [x[1], x[0]], Mat2::sym(0.0, 1.0, 0.0)))
}

fn oscillation(r: f64, t: f64) -> PolarDerivatives {
    let (s, c) = (6.0 * t).sin_cos();
    PolarDerivatives {
        f: 0.2 * r.powi(4) * s,
        r: 0.8 * r.powi(3) * s,
        t: 1.2 * r.powi(4) * c,
        rr: 2.4 * r * r * s,
        rt: 4.8 * r.powi(3) * c,
        tt: -7.2 * r.powi(4) * s,
    }
}

/// First fundamental form of `(r cos t, r sin t, 0.2 r^4 sin 6t)` in polar
/// coordinates, pulled back to Cartesian coordinates.
pub fn oscillating_boundary() -> TargetMetric {
    TargetMetric::new("oscillating_boundary", |x| {
        let (r, theta) = polar(x);
        if r < ORIGIN_RADIUS {
            return Mat2::identity();
        }
        let d = oscillation(r, theta);
        let gt = Mat2::sym(1.0 + d.r * d.r, d.r * d.t, r * r + d.t * d.t);
        polar_pullback_matrix(gt, r, theta)
    })
    .with_immersion(|x| {
        let (f, g, h) = polar_scalar(x, oscillation);
        Jet::graph(x, f, g, h)
    })
}

/// Gel disc of constant curvature `K`; for `0 < K <= pi^2` also carries the
/// embedding `(eta(r) cos t, eta(r) sin t, (1 - cos(sqrt(K) r)) / sqrt(K))`.
pub fn gel_disc(k: f64) -> Result<TargetMetric> {
    let profile = EtaProfile::constant_curvature(k)?;
    let metric = TargetMetric::from_profile("gel_disc", profile.clone());
    if k <= 0.0 || k > PI * PI {
        return Ok(metric);
    }
    let sk = k.sqrt();
    let p = profile;
    let emb = move |x: Point| {
        let xn = nudge(x);
        let (r, theta) = polar(xn);
        let [eta, d1, d2] = p.eval(r);
        let (s, c) = theta.sin_cos();
        let comps = [
            PolarDerivatives {
                f: eta * c,
                r: d1 * c,
                t: -eta * s,
                rr: d2 * c,
                rt: -d1 * s,
                tt: -eta * c,
            },
            PolarDerivatives {
                f: eta * s,
                r: d1 * s,
                t: eta * c,
                rr: d2 * s,
                rt: d1 * c,
                tt: -eta * s,
            },
            PolarDerivatives {
                f: (1.0 - (sk * r).cos()) / sk,
                r: (sk * r).sin(),
                rr: sk * (sk * r).cos(),
                ..Default::default()
            },
        ];
        let mut j = Jet::default();
        for (k, d) in comps.into_iter().enumerate() {
            let (f, g, h) = polar_to_cartesian(r, theta, d);
            j.value[k] = f;
            j.grad[k] = g;
            j.hess[k] = h;
        }
        j
    };
    let mut m = metric;
    let dg = m.dg.clone();
    m = m.with_immersion(emb);
    m.dg = dg;
    Ok(m)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Christoffel symbols `gamma[l][i][j]` of `g` from `g` and `d g`.
pub fn christoffel(g: Mat2, dg: [Mat2; 2]) -> Result<[[[f64; 2]; 2]; 2]> {
    let ginv = g.inverse().ok_or(Error::InvalidMetric {
        x: f64::NAN,
        y: f64::NAN,
    })?;
    let mut out = [[[0.0; 2]; 2]; 2];
    for (l, ol) in out.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for m in 0..2 {
                    v += ginv.m[l][m] * (dg[i].m[j][m] + dg[j].m[i][m] - dg[m].m[i][j]);
                }
                ol[i][j] = 0.5 * v;
            }
        }
    }
    Ok(out)
}

/// Pointwise terms of the alternative-energy identity.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlternativeEnergyTerms {
    pub hessian_frobenius: f64,
    pub second_form_frobenius: f64,
    pub f1: f64,
    pub hessian_trace: f64,
    pub second_form_trace: f64,
    pub f2: f64,
}

/// Evaluates both sides of the alternative-energy identity at `x`.
pub fn alternative_energy_terms(metric: &TargetMetric, x: Point) -> Result<AlternativeEnergyTerms> {
    let jet = metric.immersion(x).ok_or_else(|| {
        Error::InvalidParameter(format!("metric `{}` has no immersion", metric.name()))
    })?;
    let g = metric.g(x);
    let a = metric.inv_sqrt(x)?;
    let gam = christoffel(g, metric.dg(x))?;
    let nu = {
        let n = cross(jet.tangent(0), jet.tangent(1));
        let len = dot(n, n).sqrt();
        [n[0] / len, n[1] / len, n[2] / len]
    };
    let mut ii = Mat2::zero();
    for i in 0..2 {
        for j in 0..2 {
            ii.m[i][j] = dot(jet.second(i, j), nu);
        }
    }
    let aiia = a * ii * a;
    let mut t = AlternativeEnergyTerms {
        second_form_frobenius: aiia.ddot(&aiia),
        second_form_trace: aiia.trace().powi(2),
        ..Default::default()
    };
    for k in 0..3 {
        let m = a * jet.hess[k] * a;
        t.hessian_frobenius += m.ddot(&m);
        t.hessian_trace += m.trace().powi(2);
    }
    // c[l][i][j] = sum_{m,n} a_im Gamma^l_mn a_nj
    let mut c = [[[0.0; 2]; 2]; 2];
    for (l, cl) in c.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for m in 0..2 {
                    for n in 0..2 {
                        v += a.m[i][m] * gam[l][m][n] * a.m[n][j];
                    }
                }
                cl[i][j] = v;
            }
        }
    }
    for l1 in 0..2 {
        for l2 in 0..2 {
            let gl = g.m[l1][l2];
            for i in 0..2 {
                for j in 0..2 {
                    t.f1 += gl * c[l1][i][j] * c[l2][i][j];
                }
            }
            let tr1 = c[l1][0][0] + c[l1][1][1];
            let tr2 = c[l2][0][0] + c[l2][1][1];
            t.f2 += gl * tr1 * tr2;
        }
    }
    Ok(t)
}

/// Maximal residuals `(rho_1, rho_2)` of the alternative-energy identity
/// over the sample points.
pub fn verify_alternative_energy(metric: &TargetMetric, points: &[Point]) -> Result<(f64, f64)> {
    let mut rho = (0.0f64, 0.0f64);
    for &x in points {
        let t = alternative_energy_terms(metric, x)?;
        rho.0 = rho
            .0
            .max((t.hessian_frobenius - t.second_form_frobenius - t.f1).abs());
        rho.1 = rho
            .1
            .max((t.hessian_trace - t.second_form_trace - t.f2).abs());
    }
    Ok(rho)
}

/// Pointwise bending density
/// `mu/12 (|a D^2 y a|^2 + lambda/(2 mu + lambda) |tr(a D^2 y a)|^2)`.
pub fn bending_density(
    metric: &TargetMetric,
    jet: &Jet,
    x: Point,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    let a = metric.inv_sqrt(x)?;
    let mut fro = 0.0;
    let mut tr = 0.0;
    for k in 0..3 {
        let m = a * jet.hess[k] * a;
        fro += m.ddot(&m);
        tr += m.trace().powi(2);
    }
    Ok(mu / 12.0 * (fro + lambda / (2.0 * mu + lambda) * tr))
}

/// Uniform `n x n` sample grid of a rectangle (cell midpoints).
pub fn sample_grid(x: (f64, f64), y: (f64, f64), n: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push([
                x.0 + (x.1 - x.0) * (i as f64 + 0.5) / n as f64,
                y.0 + (y.1 - y.0) * (j as f64 + 0.5) / n as f64,
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_samples(n: usize) -> Vec<Point> {
        sample_grid((-1.0, 1.0), (-1.0, 1.0), n)
            .into_iter()
            .filter(|x| x[0].hypot(x[1]) < 1.0)
            .collect()
    }

    fn fd_jet(m: &TargetMetric, x: Point) -> (Mat2, [Mat2; 2]) {
        let h = 1e-5;
        let mut dg = [Mat2::zero(); 2];
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            dg[c] = (m.g(xp) - m.g(xm)).scale(0.5 / h);
        }
        (m.g(x), dg)
    }

    #[test]
    fn one_mode_metric_at_left_end() {
        let g = one_mode().g([-2.0, 0.3]);
        assert!((g.m[0][0] - (1.0 + PI * PI / 4.0)).abs() < 1e-14);
        assert_eq!(g.m[1][1], 1.0);
    }

    #[test]
    fn catenoid_metric_is_identity_on_axis() {
        let g = catenoid_helicoid(0.3).g([1.7, 0.0]);
        assert!((g - Mat2::identity()).norm() < 1e-15);
    }

    #[test]
    fn immersions_are_compatible() {
        let rect = sample_grid((-2.0, 2.0), (-1.0, 1.0), 20);
        let disc = disc_samples(30);
        let cases: Vec<(TargetMetric, &Vec<Point>)> = vec![
            (identity(), &rect),
            (one_mode(), &rect),
            (two_modes(), &rect),
            (catenoid_helicoid(0.0), &rect),
            (catenoid_helicoid(0.7), &rect),
            (catenoid_helicoid(PI / 2.0), &rect),
            (bubble(0.2).unwrap(), &disc),
            (hyperbolic_paraboloid(), &disc),
            (oscillating_boundary(), &disc),
            (gel_disc(2.0).unwrap(), &disc),
        ];
        for (m, pts) in cases {
            for &x in pts.iter() {
                let j = m.immersion(x).unwrap();
                let err = (j.first_fundamental_form() - m.g(x)).norm();
                assert!(err < 1e-9, "{} at {:?}: {err}", m.name(), x);
            }
        }
    }

    #[test]
    fn catalog_metrics_are_spd() {
        let rect = sample_grid((-2.0, 2.0), (-1.0, 1.0), 50);
        let disc = disc_samples(50);
        for name in CATALOG {
            let m = catalog(name, MetricParams::default()).unwrap();
            let pts = if ["one_mode", "two_modes", "catenoid_helicoid", "identity"].contains(name) {
                &rect
            } else {
                &disc
            };
            assert!(m.min_eigenvalue(pts) > 0.0, "{name}");
            for &x in pts.iter().step_by(37) {
                let a = m.inv_sqrt(x).unwrap();
                assert!((a * a * m.g(x) - Mat2::identity()).norm() < 1e-12);
            }
        }
        let m = gel_disc(-2.0).unwrap();
        assert!(m.min_eigenvalue(&disc) > 0.0);
    }

    #[test]
    fn unknown_metric_and_bad_parameters() {
        assert!(matches!(
            catalog("torus", MetricParams::default()),
            Err(Error::UnknownMetric(_))
        ));
        assert!(bubble(-1.0).is_err());
        assert!(gel_disc(0.0).is_err());
    }

    #[test]
    fn gel_pullback_on_axis() {
        let m = gel_disc(2.0).unwrap();
        let g = m.g([0.5, 0.0]);
        let expect = (2f64.sqrt() * 0.5).sin().powi(2) / (2.0 * 0.25);
        assert!((g.m[0][0] - 1.0).abs() < 1e-14);
        assert!((g.m[1][1] - expect).abs() < 1e-14);
        assert!(g.m[0][1].abs() < 1e-14);
    }

    #[test]
    fn euclidean_profile_gives_identity() {
        let m = TargetMetric::from_profile("flat", EtaProfile::euclidean());
        for x in disc_samples(11) {
            assert!((m.g(x) - Mat2::identity()).norm() < 1e-14);
        }
        assert_eq!(m.g([0.0, 0.0]), Mat2::identity());
    }

    #[test]
    fn oscillating_pullback_matches_polar_first_form() {
        let (r, t) = (1.0, PI / 12.0);
        let h = 1e-6;
        let y = |r: f64, t: f64| [r * t.cos(), r * t.sin(), 0.2 * r.powi(4) * (6.0 * t).sin()];
        let sub = |a: [f64; 3], b: [f64; 3]| {
            [
                (a[0] - b[0]) / (2.0 * h),
                (a[1] - b[1]) / (2.0 * h),
                (a[2] - b[2]) / (2.0 * h),
            ]
        };
        let yr = sub(y(r + h, t), y(r - h, t));
        let yt = sub(y(r, t + h), y(r, t - h));
        let gt_fd = Mat2::sym(dot(yr, yr), dot(yr, yt), dot(yt, yt));
        let d = oscillation(r, t);
        let gt = Mat2::sym(1.0 + d.r * d.r, d.r * d.t, r * r + d.t * d.t);
        assert!((gt - gt_fd).norm() < 1e-6);
        // pulling back then pushing forward recovers g~
        let g = oscillating_boundary().g([r * t.cos(), r * t.sin()]);
        let (s, c) = t.sin_cos();
        let jac = Mat2::new(c, -r * s, s, r * c);
        assert!((jac.transpose() * g * jac - gt).norm() < 1e-10);
    }

    #[test]
    fn analytic_metric_derivatives_match_differences() {
        let rect = sample_grid((-2.0, 2.0), (-1.0, 1.0), 7);
        let disc = disc_samples(9);
        for name in CATALOG {
            let m = catalog(name, MetricParams::default()).unwrap();
            let pts = if ["one_mode", "two_modes", "catenoid_helicoid", "identity"].contains(name) {
                &rect
            } else {
                &disc
            };
            for &x in pts.iter() {
                let (_, fd) = fd_jet(&m, x);
                let an = m.dg(x);
                for c in 0..2 {
                    assert!((an[c] - fd[c]).norm() < 1e-6, "{name} at {x:?}");
                }
            }
        }
        let m = gel_disc(-2.0).unwrap();
        for &x in disc.iter() {
            let (_, fd) = fd_jet(&m, x);
            let an = m.dg(x);
            assert!((an[0] - fd[0]).norm() + (an[1] - fd[1]).norm() < 1e-6);
        }
    }

    #[test]
    fn curvature_of_profiles() {
        let p = EtaProfile::constant_curvature(2.0).unwrap();
        let n = EtaProfile::constant_curvature(-2.0).unwrap();
        for i in 1..20 {
            let r = i as f64 / 20.0;
            assert!((gauss_curvature(&p, r).unwrap() - 2.0).abs() < 1e-10);
            assert!((gauss_curvature(&n, r).unwrap() + 2.0).abs() < 1e-10);
            assert_eq!(gauss_curvature(&EtaProfile::euclidean(), r).unwrap(), 0.0);
        }
        assert!(matches!(
            gauss_curvature(&p, 0.0),
            Err(Error::UndefinedCurvature { .. })
        ));
    }

    #[test]
    fn alternative_energy_identity() {
        let flat = identity();
        let (r1, r2) =
            verify_alternative_energy(&flat, &sample_grid((0.0, 1.0), (0.0, 1.0), 5)).unwrap();
        assert_eq!((r1, r2), (0.0, 0.0));
        let pts = sample_grid((-2.0, 2.0), (-1.0, 1.0), 20);
        let (r1, r2) = verify_alternative_energy(&one_mode(), &pts).unwrap();
        assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
        let pts = sample_grid((0.0, 6.25), (-1.0, 1.0), 20);
        let (r1, r2) = verify_alternative_energy(&catenoid_helicoid(PI / 2.0), &pts).unwrap();
        assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
    }

    #[test]
    fn bending_density_is_alpha_independent() {
        let pts = sample_grid((0.0, 6.25), (-1.0, 1.0), 10);
        for &x in &pts {
            let e: Vec<f64> = [0.0, PI / 4.0, PI / 2.0]
                .iter()
                .map(|&a| {
                    let m = catenoid_helicoid(a);
                    bending_density(&m, &m.immersion(x).unwrap(), x, 8.0, 6.0).unwrap()
                })
                .collect();
            assert!((e[0] - e[1]).abs() < 1e-9 && (e[0] - e[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_image_length_scales_with_eta() {
        let p = EtaProfile::constant_curvature(2.0).unwrap();
        let m = TargetMetric::from_profile("gel", p.clone());
        for r in [0.25, 0.5, 0.9] {
            let l = circle_image_length(&m, r, 64);
            assert!((l - 2.0 * PI * p.eval(r)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn boundary_data_is_compatible() {
        let m = one_mode();
        let b = m.boundary_data().unwrap();
        let grad = b.gradient.as_ref().unwrap();
        for y in [-0.9, 0.0, 0.5] {
            let x = [2.0, y];
            let phi = grad(x);
            let mut ftf = Mat2::zero();
            for row in phi {
                ftf += Mat2::outer(row, row);
            }
            assert!((ftf - m.g(x)).norm() < 1e-10);
        }
    }
}
