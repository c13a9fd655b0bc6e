//! Constrained discrete `H^2` gradient flow and its preprocessing.
//!
//! [`Problem`] holds everything that does not change along a flow: the
//! space, the Hessian cache, the assembled bending form `(A~, L, E_0)`, the
//! load vector and the `H^2_h` product. [`gradient_flow`] minimizes `E_h`
//! under the linearized metric constraint; [`bc_preprocess`] and
//! [`metric_preprocess`] build its initial guess.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{interpolate, BoundaryData, BrokenField, BrokenSpace, JumpSet, VectorFn};
use crate::forms::{
    assemble_bending, assemble_bilaplacian, assemble_constraint, assemble_h2_product,
    assemble_stretch, forcing_vector, linearized_defect, metric_defect, quadratic_defect,
    stretching_energy, AssembledForm, MaterialParams, MetricTable,
};
use crate::lifting::{build_hessian_cache, HessianCache, LiftingSpace};
use crate::mesh::Mesh;
use crate::metrics::TargetMetric;
use crate::solvers::{
    diagonal, flow_step_solve, schur_solve_preconditioned, CsrMatrix, Factorization,
    SchurPreconditioner, CG_TOL,
};

/// Polynomial degree of the deformation and of both liftings.
pub const DEGREE: usize = 2;
/// Hard cap on the number of steps of either flow.
pub const MAX_STEPS: usize = 20_000;
/// Relative slack of the per-step energy-decay check, on top of the
/// multiplier work `|L^T B dY|` of the inexact Schur solve.
pub const ENERGY_SLACK: f64 = 1e-10;
/// A flow right-hand side below this fraction of `|A| |Y| + |L + F|` is
/// treated as zero.
pub const STATIONARY_RTOL: f64 = 1e-12;

/// Time steps and stopping tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    /// Pseudo time step of the gradient flow.
    pub tau: f64,
    /// Stop when `|E_{n+1} - E_n| / tau <= tol`.
    pub tol: f64,
    /// Pseudo time step of the metric preprocessing.
    pub tau_pp: f64,
    /// Target defect of the metric preprocessing; `0` disables the test.
    pub eps0_pp: f64,
    /// Stationarity tolerance of the metric preprocessing; `0` disables it.
    pub tol_pp: f64,
    pub max_steps: usize,
    /// Relative tolerance of the Schur CG.
    pub cg_tol: f64,
    pub preconditioner: SchurPreconditioner,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            tau: 0.01,
            tol: 1e-6,
            tau_pp: 0.05,
            eps0_pp: 0.1,
            tol_pp: 1e-6,
            max_steps: MAX_STEPS,
            cg_tol: CG_TOL,
            preconditioner: SchurPreconditioner::None,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        pos("tau", self.tau)?;
        pos("tol", self.tol)?;
        pos("tau_pp", self.tau_pp)?;
        pos("cg_tol", self.cg_tol)?;
        if !(self.eps0_pp >= 0.0 && self.tol_pp >= 0.0) {
            return Err(Error::InvalidParameter(
                "eps0_pp and tol_pp must be non-negative".into(),
            ));
        }
        if self.eps0_pp == 0.0 && self.tol_pp == 0.0 {
            return Err(Error::InvalidParameter(
                "metric preprocessing needs eps0_pp > 0 or tol_pp > 0".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted step of a flow.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Bending energy `E_h` after the step.
    pub energy: f64,
    /// Metric defect `D_h` after the step.
    pub defect: f64,
    pub schur_iters: usize,
    /// `||dy||_{H^2_h}`.
    pub increment_norm: f64,
    pub wall_ms: f64,
    /// Stretching energy after a preprocessing step, `0` in the main flow.
    pub stretching: f64,
    /// `sum_K |int_K (grad dy^T grad y + grad y^T grad dy)|` of the step.
    pub constraint_residual: f64,
}

/// Observer called after every accepted step.
pub type StepObserver<'a> = &'a mut dyn FnMut(&StepRecord) -> Result<()>;

/// State of a flow after it stopped.
#[derive(Clone, Debug)]
pub struct FlowState {
    /// Number of accepted steps.
    pub n: usize,
    pub y: BrokenField,
    pub energy: f64,
    pub defect: f64,
    pub history: Vec<StepRecord>,
    /// False when `max_steps` was reached first.
    pub converged: bool,
}

impl FlowState {
    /// Smallest and largest Schur iteration counts over the history.
    pub fn schur_range(&self) -> Option<(usize, usize)> {
        let it = self.history.iter().map(|r| r.schur_iters);
        Some((it.clone().min()?, it.max()?))
    }
}

/// Discrete problem data shared by all stages of an experiment.
pub struct Problem {
    pub space: Arc<BrokenSpace>,
    pub lifting: LiftingSpace,
    pub metric: TargetMetric,
    pub metric_table: MetricTable,
    pub material: MaterialParams,
    pub forcing: Option<VectorFn>,
    /// Dirichlet data `(phi, Phi)` on the Dirichlet part of the mesh.
    pub boundary: Option<BoundaryData>,
    pub cache: HessianCache,
    /// Bending form `(A~, L, E_0)`.
    pub bending: AssembledForm,
    /// Load vector `F`.
    pub load: Vec<f64>,
    /// Scalar block of the `H^2_h` product on `V_h(0, 0)`.
    pub h2: CsrMatrix,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("cells", &self.space.mesh().num_cells())
            .field("metric", &self.metric.name())
            .field("material", &self.material)
            .field("dirichlet", &self.boundary.is_some())
            .finish()
    }
}

impl Problem {
    /// Builds the `Q_2` problem on `mesh`. Dirichlet data defaults to the
    /// immersion of the metric when the mesh has Dirichlet edges.
    pub fn new(
        mesh: Arc<Mesh>,
        metric: TargetMetric,
        material: MaterialParams,
        forcing: Option<VectorFn>,
        boundary: Option<BoundaryData>,
    ) -> Result<Self> {
        material.validate()?;
        let space = Arc::new(BrokenSpace::new(mesh.clone(), DEGREE)?);
        let lifting = LiftingSpace::matching(&space)?;
        let boundary = if mesh.has_dirichlet() {
            match boundary.or_else(|| metric.boundary_data()) {
                Some(b) => Some(b),
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "metric `{}` has no immersion to supply Dirichlet data",
                        metric.name()
                    )))
                }
            }
        } else {
            None
        };
        let rules = JumpSet::standard(&mesh);
        let cache = build_hessian_cache(&space, &lifting, &rules, boundary.as_ref())?;
        let metric_table = MetricTable::new(&space, &metric)?;
        let bending =
            assemble_bending(&space, &cache, &metric_table, &material, boundary.as_ref())?;
        let load = forcing_vector(&space, forcing.as_ref());
        let h2 = assemble_h2_product(&space, &rules, material.sigma)?;
        Ok(Self {
            space,
            lifting,
            metric,
            metric_table,
            material,
            forcing,
            boundary,
            cache,
            bending,
            load,
            h2,
        })
    }

    pub fn field(&self, coeffs: Vec<f64>) -> Result<BrokenField> {
        BrokenField::from_coeffs(self.space.clone(), coeffs, self.boundary.clone())
    }

    /// Flat identity `(x, 0)`.
    pub fn identity(&self) -> BrokenField {
        interpolate(&self.space, |x| [x[0], x[1], 0.0], self.boundary.clone())
    }

    /// Nodal interpolant of the immersion of the metric.
    pub fn interpolate_immersion(&self) -> Result<BrokenField> {
        if !self.metric.has_immersion() {
            return Err(Error::InvalidParameter(format!(
                "metric `{}` has no immersion to interpolate",
                self.metric.name()
            )));
        }
        let m = self.metric.clone();
        Ok(interpolate(
            &self.space,
            move |x| m.immersion(x).map(|j| j.value).unwrap_or([x[0], x[1], 0.0]),
            self.boundary.clone(),
        ))
    }

    /// `E_h` from the assembled form.
    pub fn energy(&self, y: &[f64]) -> f64 {
        self.bending.quadratic_energy(y) - dot(&self.load, y)
    }

    /// `E_h` by direct quadrature of the discrete Hessian and the jumps.
    pub fn energy_direct(&self, y: &BrokenField) -> Result<f64> {
        crate::forms::energy(
            y,
            &self.cache,
            &self.metric_table,
            &self.material,
            self.forcing.as_ref(),
        )
    }

    pub fn defect(&self, y: &BrokenField) -> f64 {
        metric_defect(y, &self.metric_table)
    }

    pub fn stretching(&self, y: &BrokenField) -> f64 {
        stretching_energy(y, &self.metric_table)
    }

    /// `||v||_{H^2_h}` componentwise.
    pub fn h2_norm(&self, v: &[f64]) -> f64 {
        let n = self.h2.nrows();
        v.chunks(n)
            .map(|c| self.h2.bilinear(c, c))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    fn with_coeffs(&self, template: &BrokenField, coeffs: Vec<f64>) -> Result<BrokenField> {
        BrokenField::from_coeffs(self.space.clone(), coeffs, template.boundary().cloned())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn stage_error(stage: &'static str, step: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Flow {
        stage,
        step,
        source: Box::new(e),
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Algorithm of the main gradient flow.
///
/// Every step solves
/// `[tau^{-1} M + A~, B_n^T; B_n, 0] [dY; Lambda] = [F + L - A~ Y^n; 0]`
/// by the Schur complement method, with `tau^{-1} M + A~` factored once.
pub fn gradient_flow(
    problem: &Problem,
    y0: BrokenField,
    params: &FlowParams,
    mut observer: Option<StepObserver<'_>>,
) -> Result<FlowState> {
    params.validate()?;
    const STAGE: &str = "gradient flow";
    let a =
        CsrMatrix::linear_combination(1.0 / params.tau, &problem.h2, 1.0, &problem.bending.matrix);
    let factor = Factorization::new(&a).map_err(stage_error(STAGE, 0))?;
    debug!(
        "gradient flow: factored {} x {} block ({})",
        a.nrows(),
        a.ncols(),
        factor.kind()
    );
    let a_diag = (params.preconditioner == SchurPreconditioner::Diagonal).then(|| diagonal(&a));
    let row_sum_max = (0..problem.bending.matrix.nrows())
        .map(|i| {
            problem
                .bending
                .matrix
                .row(i)
                .1
                .iter()
                .map(|v| v.abs())
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    let rhs_fixed: Vec<f64> = problem
        .load
        .iter()
        .zip(&problem.bending.data)
        .map(|(f, l)| f + l)
        .collect();

    let mut y = y0;
    let mut e = problem.energy(y.coeffs());
    let mut d = problem.defect(&y);
    let mut history = Vec::new();
    let mut converged = false;
    info!("gradient flow: start E = {e:.6e}, D = {d:.6e}");
    for step in 1..=params.max_steps {
        let t0 = Instant::now();
        let ay = problem.bending.apply(y.coeffs());
        let f: Vec<f64> = rhs_fixed.iter().zip(&ay).map(|(r, a)| r - a).collect();
        let ymax = y.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f_scale = row_sum_max * ymax + rhs_fixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if f.iter().all(|v| v.abs() <= STATIONARY_RTOL * f_scale) {
            debug!("gradient flow: residual at rounding level at step {step}");
            converged = true;
            break;
        }
        let b = assemble_constraint(&y);
        let schur = schur_solve_preconditioned(
            &b,
            &factor,
            &f,
            params.cg_tol,
            10 * b.nrows().max(1),
            a_diag.as_deref(),
        )
        .map_err(stage_error(STAGE, step))?;
        let dy = flow_step_solve(&factor, &b, &f, &schur.multipliers);
        let scale = y.coeffs().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if dy.iter().all(|v| v.abs() <= 1e-13 * scale) {
            debug!("gradient flow: stationary at step {step}");
            converged = true;
            break;
        }
        let dy_field = problem.with_coeffs(&y, dy.clone())?;
        let lin = linearized_defect(&y, &dy_field);
        let quad = quadratic_defect(&dy_field);
        let coeffs: Vec<f64> = y.coeffs().iter().zip(&dy).map(|(a, b)| a + b).collect();
        let y_new = problem.with_coeffs(&y, coeffs)?;
        let e_new = problem.energy(y_new.coeffs());
        let d_new = problem.defect(&y_new);
        // energy change of an inexact constraint solve, beyond the decrease
        let multiplier_work: f64 = b
            .apply(&dy)
            .iter()
            .zip(&schur.multipliers)
            .map(|(r, l)| r * l)
            .sum();
        if e_new > e + ENERGY_SLACK * e.abs().max(1.0) + multiplier_work.abs() {
            return Err(Error::EnergyIncrease {
                step,
                before: e,
                after: e_new,
            });
        }
        if d_new > d + quad + lin + 1e-12 * (1.0 + d) {
            return Err(Error::Internal(format!(
                "defect bound violated at step {step}: {d_new:e} > {d:e} + {quad:e} + {lin:e}"
            )));
        }
        let rec = StepRecord {
            step,
            energy: e_new,
            defect: d_new,
            schur_iters: schur.iterations,
            increment_norm: problem.h2_norm(&dy),
            wall_ms: elapsed_ms(t0),
            stretching: 0.0,
            constraint_residual: lin,
        };
        if let Some(obs) = observer.as_mut() {
            obs(&rec)?;
        }
        history.push(rec);
        let de = (e_new - e).abs() / params.tau;
        debug!(
            "gradient flow {step}: E = {e_new:.8e}, D = {d_new:.6e}, schur = {}, |dE|/tau = {de:.3e}",
            schur.iterations
        );
        y = y_new;
        e = e_new;
        d = d_new;
        if de <= params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("gradient flow: max_steps = {} reached", params.max_steps);
    }
    info!(
        "gradient flow: {} steps, E = {e:.6e}, D = {d:.6e}",
        history.len()
    );
    Ok(FlowState {
        n: history.len(),
        y,
        energy: e,
        defect: d,
        history,
        converged,
    })
}

/// Boundary handling of the boundary-condition preprocessing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    /// Dirichlet data `(phi, Phi)` on the Dirichlet edges.
    Clamped,
    /// `phi = (x, 0)` on every boundary edge, no gradient data.
    ValueAnchored,
}

/// Solves the bi-Laplacian problem `c_h(y, v) = (f_hat, v)` once.
///
/// The returned field carries the Dirichlet data of `problem`.
pub fn bc_preprocess(
    problem: &Problem,
    mode: BcMode,
    f_hat: [f64; 3],
    gamma_hat: (f64, f64),
) -> Result<BrokenField> {
    const STAGE: &str = "boundary preprocessing";
    let space = &problem.space;
    let mesh = space.mesh();
    let (rules, data, cache_owned);
    let cache = match mode {
        BcMode::Clamped => {
            if problem.boundary.is_none() {
                return Err(Error::InvalidParameter(
                    "clamped preprocessing needs Dirichlet edges and data".into(),
                ));
            }
            data = problem.boundary.clone();
            &problem.cache
        }
        BcMode::ValueAnchored => {
            rules = JumpSet::value_anchored(mesh);
            data = Some(BoundaryData::value_only(|x| [x[0], x[1], 0.0]));
            cache_owned = build_hessian_cache(space, &problem.lifting, &rules, data.as_ref())?;
            &cache_owned
        }
    };
    let form = assemble_bilaplacian(space, cache, gamma_hat.0, gamma_hat.1, data.as_ref())?;
    let factor = Factorization::new(&form.matrix).map_err(stage_error(STAGE, 0))?;
    let f: VectorFn = Arc::new(move |_| f_hat);
    let load = forcing_vector(space, Some(&f));
    let mut rhs: Vec<f64> = load.iter().zip(&form.data).map(|(a, b)| a + b).collect();
    factor.solve_blocks_in_place(&mut rhs);
    let residual = {
        let r = form.apply(&rhs);
        let err: f64 = r
            .iter()
            .zip(load.iter().zip(&form.data))
            .map(|(a, (f, l))| (a - f - l).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = load
            .iter()
            .zip(&form.data)
            .map(|(f, l)| (f + l).powi(2))
            .sum::<f64>()
            .sqrt();
        err / scale.max(1e-300)
    };
    if residual > 1e-6 {
        return Err(stage_error(STAGE, 0)(Error::IllPosed(format!(
            "bi-Laplacian residual {residual:e}"
        ))));
    }
    problem.field(rhs)
}

/// Metric preprocessing: the `H^2_h` flow of the stretching energy
/// `1/2 int |grad y^T grad y - g|^2`.
///
/// Stops when `D_h <= eps0_pp` (checked first, also for `y0`) or when
/// `|E~_{n+1} - E~_n| / tau_pp <= tol_pp`.
pub fn metric_preprocess(
    problem: &Problem,
    y0: BrokenField,
    params: &FlowParams,
    mut observer: Option<StepObserver<'_>>,
) -> Result<FlowState> {
    params.validate()?;
    const STAGE: &str = "metric preprocessing";
    let m_scaled = {
        let z = CsrMatrix::from_triplets(problem.h2.nrows(), problem.h2.ncols(), Vec::new());
        CsrMatrix::linear_combination(1.0 / params.tau_pp, &problem.h2, 0.0, &z)
    };
    let mut y = y0;
    let mut es = problem.stretching(&y);
    let mut d = problem.defect(&y);
    let mut history = Vec::new();
    let mut converged = params.eps0_pp > 0.0 && d <= params.eps0_pp;
    info!("metric preprocessing: start E~ = {es:.6e}, D = {d:.6e}");
    if !converged {
        for step in 1..=params.max_steps {
            let t0 = Instant::now();
            let (s, rhs) = assemble_stretch(&y, &problem.metric_table);
            let lhs = CsrMatrix::linear_combination(1.0, &m_scaled, 1.0, &s);
            let factor = Factorization::new(&lhs).map_err(stage_error(STAGE, step))?;
            let mut dy = rhs;
            factor.solve_blocks_in_place(&mut dy);
            let coeffs: Vec<f64> = y.coeffs().iter().zip(&dy).map(|(a, b)| a + b).collect();
            let y_new = problem.with_coeffs(&y, coeffs)?;
            let es_new = problem.stretching(&y_new);
            let d_new = problem.defect(&y_new);
            if es_new > es {
                warn!("metric preprocessing: stretching energy increased at step {step}: {es:e} -> {es_new:e}");
            }
            let rec = StepRecord {
                step,
                energy: problem.energy(y_new.coeffs()),
                defect: d_new,
                schur_iters: 0,
                increment_norm: problem.h2_norm(&dy),
                wall_ms: elapsed_ms(t0),
                stretching: es_new,
                constraint_residual: 0.0,
            };
            if let Some(obs) = observer.as_mut() {
                obs(&rec)?;
            }
            history.push(rec);
            let de = (es_new - es).abs() / params.tau_pp;
            debug!("metric preprocessing {step}: E~ = {es_new:.6e}, D = {d_new:.6e}, |dE~|/tau = {de:.3e}");
            y = y_new;
            es = es_new;
            d = d_new;
            if (params.eps0_pp > 0.0 && d <= params.eps0_pp)
                || (params.tol_pp > 0.0 && de <= params.tol_pp)
            {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        warn!(
            "metric preprocessing: max_steps = {} reached",
            params.max_steps
        );
    }
    let energy = problem.energy(y.coeffs());
    info!(
        "metric preprocessing: {} steps, E = {energy:.6e}, D = {d:.6e}",
        history.len()
    );
    Ok(FlowState {
        n: history.len(),
        y,
        energy,
        defect: d,
        history,
        converged,
    })
}
