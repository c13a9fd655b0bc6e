//! Experiment descriptions, the preset table and the experiment driver.
//!
//! An [`ExperimentSpec`] fixes the domain, mesh, metric, material, load,
//! initial-guess recipe and flow parameters of a run. [`run_experiment`]
//! executes the preprocessing stages and the gradient flow and optionally
//! writes per-stage VTK files and CSV logs.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::sync::Arc;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{BrokenField, VectorFn};
use crate::flows::{
    bc_preprocess, gradient_flow, metric_preprocess, BcMode, FlowParams, FlowState, Problem,
    StepRecord,
};
use crate::forms::{metric_defect_per_cell, MaterialParams};
use crate::mesh::{BoundaryRegion, Mesh};
use crate::metrics::{catalog, MetricParams};
use crate::output::ArtifactWriter;

/// Computational domain and mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
        nx: usize,
        ny: usize,
        dirichlet: BoundaryRegion,
    },
    Disc {
        radius: f64,
        cells: usize,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            DomainSpec::Rectangle {
                x,
                y,
                nx,
                ny,
                dirichlet,
            } => Mesh::rectangle((x[0], x[1]), (y[0], y[1]), *nx, *ny, dirichlet.clone()),
            DomainSpec::Disc { radius, cells } => Mesh::disc(*radius, *cells),
        }
    }
}

/// Target metric by catalog name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
}

impl MetricSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            alpha: None,
            curvature: None,
        }
    }
}

/// Recipe of the initial guess of the metric preprocessing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Flat identity `(x, 0)`.
    Identity,
    /// Nodal interpolant of the immersion of the metric.
    Interpolate,
    /// Bi-Laplacian with the Dirichlet data on the Dirichlet edges.
    Clamped,
    /// Bi-Laplacian with `phi = (x, 0)` on the whole boundary and no `Phi`.
    ValueAnchored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub kind: InitKind,
    /// Fictitious force of the bi-Laplacian problem.
    pub f_hat: [f64; 3],
    pub gamma0_hat: f64,
    pub gamma1_hat: f64,
}

impl InitSpec {
    fn of(kind: InitKind, f_hat: [f64; 3]) -> Self {
        Self {
            kind,
            f_hat,
            gamma0_hat: 1.0,
            gamma1_hat: 1.0,
        }
    }
}

/// Full description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub domain: DomainSpec,
    pub metric: MetricSpec,
    pub material: MaterialParams,
    /// Constant body force `f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<[f64; 3]>,
    pub init: InitSpec,
    /// Run the metric preprocessing after the initial guess.
    pub metric_pp: bool,
    /// Amplitude of a seeded random perturbation of `y_3` added before the
    /// gradient flow; `0` disables it.
    pub perturbation: f64,
    pub flow: FlowParams,
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "identity_square",
    "vertical_load",
    "one_mode",
    "one_mode_free",
    "two_modes",
    "catenoid",
    "helicoid",
    "bubble",
    "hyperbolic_paraboloid",
    "oscillating_boundary",
    "oscillating_boundary_flat",
    "gel_disc",
    "gel_disc_hyperbolic",
    "gel_disc_hyperbolic_bilaplacian",
];

/// Presets taking a refinement level.
pub const LEVEL_PRESETS: &[&str] = &["identity_square", "vertical_load"];

/// Default refinement level of [`LEVEL_PRESETS`].
pub const DEFAULT_LEVEL: u32 = 3;

fn rect(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize, dirichlet: &str) -> DomainSpec {
    DomainSpec::Rectangle {
        x,
        y,
        nx,
        ny,
        dirichlet: dirichlet.parse().expect("valid preset boundary"),
    }
}

fn material(lambda: f64, sigma: f64) -> MaterialParams {
    MaterialParams {
        lambda,
        mu: 6.0,
        gamma0: 1.0,
        gamma1: 1.0,
        sigma,
    }
}

fn flow(tau: f64, tau_pp: f64, eps0_pp: f64, tol_pp: f64) -> FlowParams {
    FlowParams {
        tau,
        tol: 1e-6,
        tau_pp,
        eps0_pp,
        tol_pp,
        ..FlowParams::default()
    }
}

/// Unit disc with 320 cells.
fn unit_disc() -> DomainSpec {
    DomainSpec::Disc {
        radius: 1.0,
        cells: 320,
    }
}

/// Preset by name; `level` applies to [`LEVEL_PRESETS`].
pub fn preset(name: &str, level: Option<u32>) -> Result<ExperimentSpec> {
    let level = level.unwrap_or(DEFAULT_LEVEL);
    if !LEVEL_PRESETS.contains(&name) && level != DEFAULT_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "preset `{name}` has no refinement level"
        )));
    }
    if level > 10 {
        return Err(Error::InvalidParameter(format!("level {level} too large")));
    }
    let flat = [0.0; 3];
    let spec =
        |domain, metric: MetricSpec, material, forcing, init, metric_pp, flow| ExperimentSpec {
            name: name.to_string(),
            domain,
            metric,
            material,
            forcing,
            init,
            metric_pp,
            perturbation: 0.0,
            flow,
        };
    let s = match name {
        "identity_square" => {
            let n = 1usize << level;
            spec(
                rect([0.0, 1.0], [0.0, 1.0], n, n, "none"),
                MetricSpec::named("identity"),
                material(8.0, 1.0),
                None,
                InitSpec::of(InitKind::Identity, flat),
                false,
                flow(0.1, 0.05, 0.1, 1e-6),
            )
        }
        // (0,4)^2 clamped on {x1 = 0} and {x2 = 0}, lambda = 0, f = (0,0,0.025),
        // tau = h = sqrt(2) / 2^(l-2), flat start without preprocessing
        "vertical_load" => {
            let n = 1usize << level;
            let h = SQRT_2 * 4.0 / n as f64;
            spec(
                rect([0.0, 4.0], [0.0, 4.0], n, n, "x=0;y=0"),
                MetricSpec::named("identity"),
                material(0.0, 0.0),
                Some([0.0, 0.0, 0.025]),
                InitSpec::of(InitKind::Identity, flat),
                false,
                flow(h, 0.05, 0.1, 1e-6),
            )
        }
        // (-2,2) x (-1,1) clamped on x1 = +-2, 1024 cells, tau = 0.1,
        // tau~ = 0.05, eps~ = 0.1, tol~ = 1e-6
        "one_mode" | "two_modes" => spec(
            rect([-2.0, 2.0], [-1.0, 1.0], 32, 32, "x=-2;x=2"),
            MetricSpec::named(name),
            material(8.0, 0.0),
            None,
            InitSpec::of(InitKind::Clamped, flat),
            true,
            flow(0.1, 0.05, 0.1, 1e-6),
        ),
        // same metric, free boundary, metric preprocessing from the flat plate
        "one_mode_free" => spec(
            rect([-2.0, 2.0], [-1.0, 1.0], 32, 32, "none"),
            MetricSpec::named("one_mode"),
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::Identity, flat),
            true,
            flow(0.1, 0.05, 0.1, 1e-6),
        ),
        // (0,6.25) x (-1,1), 896 cells, free, f_hat = (0,0,4); tau = 0.025
        // fitted to the final defect at tol~ = 0.01
        "catenoid" => spec(
            rect([0.0, 6.25], [-1.0, 1.0], 56, 16, "none"),
            MetricSpec::named("catenoid_helicoid"),
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::ValueAnchored, [0.0, 0.0, 4.0]),
            true,
            flow(0.025, 0.05, 0.1, 0.01),
        ),
        // (0,4.5) x (-1,1) clamped on x1 = 0 with the alpha = 0 data, 640 cells,
        // tau = 0.01, tau~ = 0.01, eps~ = 0.1, tol~ = 1e-3
        "helicoid" => spec(
            rect([0.0, 4.5], [-1.0, 1.0], 40, 16, "x=0"),
            MetricSpec {
                name: "catenoid_helicoid".into(),
                alpha: Some(0.0),
                curvature: None,
            },
            material(8.0, 0.0),
            None,
            InitSpec::of(InitKind::Clamped, flat),
            true,
            flow(0.01, 0.01, 0.1, 1e-3),
        ),
        // unit disc, 320 cells, free, tau = 0.01, identity start,
        // tau~ = 0.05, eps~ = 0.1, tol~ = 1e-6
        "bubble" | "hyperbolic_paraboloid" => spec(
            unit_disc(),
            MetricSpec::named(name),
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::Identity, flat),
            true,
            flow(0.01, 0.05, 0.1, 1e-6),
        ),
        // tau = tau~ = 0.05, eps~ = 0.1, tol~ = 1e-4; interpolated immersion
        "oscillating_boundary" => spec(
            unit_disc(),
            MetricSpec::named("oscillating_boundary"),
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::Interpolate, flat),
            true,
            flow(0.05, 0.05, 0.1, 1e-4),
        ),
        "oscillating_boundary_flat" => spec(
            unit_disc(),
            MetricSpec::named("oscillating_boundary"),
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::ValueAnchored, [0.0, 0.0, 1.0]),
            true,
            flow(0.05, 0.05, 0.1, 1e-4),
        ),
        // gel discs: tau~ = 0.05, eps~ = 0.1, tol~ = 1e-4; K = 2 with
        // f_hat = (0,0,1) and tau = 0.05
        "gel_disc" => spec(
            unit_disc(),
            MetricSpec {
                name: "gel_disc".into(),
                alpha: None,
                curvature: Some(2.0),
            },
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::ValueAnchored, [0.0, 0.0, 1.0]),
            true,
            flow(0.05, 0.05, 0.1, 1e-4),
        ),
        // K = -2 from the identity, tau = 0.00625
        "gel_disc_hyperbolic" => spec(
            unit_disc(),
            MetricSpec {
                name: "gel_disc".into(),
                alpha: None,
                curvature: Some(-2.0),
            },
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::Identity, flat),
            true,
            flow(0.00625, 0.05, 0.1, 1e-4),
        ),
        // K = -2 from the bi-Laplacian with f_hat = (0,0,1), tau = 0.0125
        "gel_disc_hyperbolic_bilaplacian" => spec(
            unit_disc(),
            MetricSpec {
                name: "gel_disc".into(),
                alpha: None,
                curvature: Some(-2.0),
            },
            material(8.0, 1.0),
            None,
            InitSpec::of(InitKind::ValueAnchored, [0.0, 0.0, 1.0]),
            true,
            flow(0.0125, 0.05, 0.1, 1e-4),
        ),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(s)
}

/// Energy and defect after one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub label: &'static str,
    pub energy: f64,
    pub defect: f64,
    /// Steps of the stage; `None` for stages without iterations.
    pub iterations: Option<usize>,
    /// `||[y]||_{L^2}` over the Dirichlet edges, when there are any.
    pub dirichlet_jump: Option<f64>,
}

/// Result of [`run_experiment`].
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub problem: Problem,
    pub stages: Vec<StageReport>,
    pub preprocess: Option<FlowState>,
    pub flow: FlowState,
    /// Field after each stage, labelled as in `stages`.
    pub fields: Vec<(&'static str, BrokenField)>,
}

impl ExperimentOutcome {
    pub fn stage(&self, label: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.label == label)
    }

    /// Table with one column per stage.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.spec.name);
        let _ = writeln!(
            s,
            "cells: {}, DoFs: {}",
            self.problem.space.mesh().num_cells(),
            30 * self.problem.space.mesh().num_cells()
        );
        let _ = write!(s, "{:<10}", "");
        for st in &self.stages {
            let _ = write!(s, " {:>14}", st.label);
        }
        let _ = writeln!(s);
        let row = |s: &mut String, name: &str, f: &dyn Fn(&StageReport) -> String| {
            let _ = write!(s, "{name:<10}");
            for st in &self.stages {
                let _ = write!(s, " {:>14}", f(st));
            }
            let _ = writeln!(s);
        };
        row(&mut s, "E_h", &|st| format!("{:.6e}", st.energy));
        row(&mut s, "D_h", &|st| format!("{:.6e}", st.defect));
        row(&mut s, "steps", &|st| {
            st.iterations.map_or("-".into(), |n| n.to_string())
        });
        if let Some((lo, hi)) = self.flow.schur_range() {
            let _ = writeln!(s, "Schur iterations: [{lo}, {hi}]");
        }
        s
    }
}

impl ExperimentSpec {
    /// Builds the discrete problem of the spec.
    pub fn problem(&self) -> Result<Problem> {
        let mesh = Arc::new(self.domain.build()?);
        let metric = catalog(
            &self.metric.name,
            MetricParams {
                alpha: self.metric.alpha,
                curvature: self.metric.curvature,
            },
        )?;
        let forcing: Option<VectorFn> = self.forcing.map(|f| Arc::new(move |_| f) as VectorFn);
        Problem::new(mesh, metric, self.material, forcing, None)
    }
}

fn stage(
    problem: &Problem,
    label: &'static str,
    y: &BrokenField,
    iterations: Option<usize>,
) -> Result<StageReport> {
    let dirichlet_jump = if problem.boundary.is_some() {
        Some(y.dirichlet_jump_norm()?)
    } else {
        None
    };
    Ok(StageReport {
        label,
        energy: problem.energy(y.coeffs()),
        defect: problem.defect(y),
        iterations,
        dirichlet_jump,
    })
}

fn perturb(y: &mut BrokenField, amplitude: f64) {
    let ns = y.space().scalar_dofs();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for v in &mut y.coeffs_mut()[2 * ns..] {
        *v += amplitude * rng.gen_range(-1.0..=1.0);
    }
}

/// Runs the stages of `spec`: initial guess, metric preprocessing and
/// gradient flow. With `artifacts`, writes one VTK file per stage and the
/// iteration logs `metric_pp.csv` and `flow.csv`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    artifacts: Option<&ArtifactWriter>,
) -> Result<ExperimentOutcome> {
    spec.flow.validate()?;
    let problem = spec.problem()?;
    info!("{}: {} cells", spec.name, problem.space.mesh().num_cells());
    let mut stages = Vec::new();
    let mut fields = Vec::new();
    let identity = problem.identity();
    stages.push(stage(&problem, "Initial", &identity, None)?);
    let bc_mode = match spec.init.kind {
        InitKind::Clamped => Some(BcMode::Clamped),
        InitKind::ValueAnchored => Some(BcMode::ValueAnchored),
        _ => None,
    };
    let mut y = match (spec.init.kind, bc_mode) {
        (_, Some(mode)) => {
            let y = bc_preprocess(
                &problem,
                mode,
                spec.init.f_hat,
                (spec.init.gamma0_hat, spec.init.gamma1_hat),
            )?;
            stages.push(stage(&problem, "BC PP", &y, None)?);
            fields.push(("BC PP", y.clone()));
            y
        }
        (InitKind::Interpolate, None) => {
            let y = problem.interpolate_immersion()?;
            stages.push(stage(&problem, "Interpolant", &y, None)?);
            fields.push(("Interpolant", y.clone()));
            y
        }
        _ => identity,
    };
    let write_vtk = |label: &str, y: &BrokenField| -> Result<()> {
        if let Some(a) = artifacts {
            let name = label.to_lowercase().replace(' ', "_");
            let defect = metric_defect_per_cell(y, &problem.metric_table);
            a.vtk(
                &format!("{name}.vtk"),
                &format!("{} {label}", spec.name),
                y,
                &defect,
            )?;
        }
        Ok(())
    };
    if let Some((label, f)) = fields.last() {
        write_vtk(label, f)?;
    }
    let preprocess = if spec.metric_pp {
        let mut log = artifacts.map(|a| a.csv_log("metric_pp.csv")).transpose()?;
        let mut obs = |r: &StepRecord| log.as_mut().map_or(Ok(()), |l| l.record(r));
        let st = metric_preprocess(&problem, y, &spec.flow, Some(&mut obs))?;
        y = st.y.clone();
        stages.push(stage(&problem, "Metric PP", &y, Some(st.n))?);
        fields.push(("Metric PP", y.clone()));
        write_vtk("Metric PP", &y)?;
        Some(st)
    } else {
        None
    };
    if spec.perturbation != 0.0 {
        perturb(&mut y, spec.perturbation);
    }
    let mut log = artifacts.map(|a| a.csv_log("flow.csv")).transpose()?;
    let mut obs = |r: &StepRecord| log.as_mut().map_or(Ok(()), |l| l.record(r));
    let flow = gradient_flow(&problem, y, &spec.flow, Some(&mut obs))?;
    stages.push(stage(&problem, "Final", &flow.y, Some(flow.n))?);
    fields.push(("Final", flow.y.clone()));
    write_vtk("Final", &flow.y)?;
    let outcome = ExperimentOutcome {
        spec: spec.clone(),
        problem,
        stages,
        preprocess,
        flow,
        fields,
    };
    if let Some(a) = artifacts {
        a.text("summary.txt", &outcome.summary())?;
    }
    Ok(outcome)
}

/// Number of samples of [`diagonal_deflection`].
pub const DIAGONAL_SAMPLES: usize = 101;

/// Maximum of `y_3` along the anti-diagonal `x_1 + x_2 = 4` of `(0,4)^2`.
pub fn diagonal_deflection(y: &BrokenField) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for i in 0..DIAGONAL_SAMPLES {
        let s = 4.0 * i as f64 / (DIAGONAL_SAMPLES - 1) as f64;
        max = max.max(y.value_at_point([s, 4.0 - s])?[2]);
    }
    Ok(max)
}

/// One row of a level sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRow {
    pub level: u32,
    pub energy: f64,
    pub defect: f64,
    pub steps: usize,
    pub schur: Option<(usize, usize)>,
    /// Maximum diagonal deflection, for `vertical_load`.
    pub deflection: Option<f64>,
    pub seconds: f64,
}

impl std::fmt::Display for LevelRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let schur = self
            .schur
            .map_or("-".to_string(), |(lo, hi)| format!("[{lo}, {hi}]"));
        let defl = self
            .deflection
            .map_or("-".to_string(), |d| format!("{d:.4}"));
        write!(
            f,
            "{:>5} {:>13.4e} {:>12.4e} {:>6} {:>12} {:>10} {:>9.2}",
            self.level, self.energy, self.defect, self.steps, schur, defl, self.seconds
        )
    }
}

/// Header matching [`LevelRow`]'s display.
pub const LEVEL_HEADER: &str =
    "level           E_h          D_h  steps        Schur deflection  time [s]";

/// Runs a level preset at `level` with the stabilization parameters
/// `gamma0 = gamma1 = gamma` when given.
pub fn run_level(name: &str, level: u32, gamma: Option<f64>) -> Result<LevelRow> {
    let mut spec = preset(name, Some(level))?;
    if let Some(g) = gamma {
        spec.material.gamma0 = g;
        spec.material.gamma1 = g;
    }
    let t0 = std::time::Instant::now();
    let out = run_experiment(&spec, None)?;
    let deflection = if name == "vertical_load" {
        Some(diagonal_deflection(&out.flow.y)?)
    } else {
        None
    };
    Ok(LevelRow {
        level,
        energy: out.flow.energy,
        defect: out.flow.defect,
        steps: out.flow.n,
        schur: out.flow.schur_range(),
        deflection,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
