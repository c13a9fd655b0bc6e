use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers and flows.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate cell {cell}: Jacobian determinant {det:e}")]
    DegenerateCell { cell: usize, det: f64 },
    #[error("boundary data required on edge {edge} but none was supplied")]
    MissingBoundaryData { edge: usize },
    #[error("metric is not SPD at ({x:.6}, {y:.6})")]
    InvalidMetric { x: f64, y: f64 },
    #[error("undefined curvature: eta({r}) = 0")]
    UndefinedCurvature { r: f64 },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("ill-posed system: {0}")]
    IllPosed(String),
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("energy increased at step {step}: {before:e} -> {after:e}")]
    EnergyIncrease {
        step: usize,
        before: f64,
        after: f64,
    },
    #[error("{stage} failed at step {step}: {source}")]
    Flow {
        stage: &'static str,
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
