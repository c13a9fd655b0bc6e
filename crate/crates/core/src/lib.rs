//! Local discontinuous Galerkin discretization of prestrained plates.
//!
//! The crate assembles the reconstructed-Hessian bending energy of a
//! deformation `y: Omega -> R^3` on broken `Q_k` spaces, and minimizes it
//! under a relaxed metric constraint with a discrete `H^2` gradient flow
//! preceded by boundary-condition and metric preprocessing.
//!
//! Layout, bottom up:
//!
//! * [`quadrature`], [`small`], [`scalar`]: reference-element kernels,
//!   generic over [`scalar::Scalar`].
//! * [`mesh`]: structured quadrilateral meshes of rectangles and discs.
//! * [`fe_space`]: broken spaces, fields, traces, interpolation.
//! * [`lifting`]: lifting operators and the discrete Hessian cache.
//! * [`forms`]: energies, bilinear forms and constraint matrices.
//! * [`solvers`]: sparse factorization and the Schur-complement solver.
//! * [`flows`]: gradient flow and preprocessing.
//! * [`presets`]: experiment descriptions, presets and the driver.
//! * [`metrics`]: target metric catalog and differential-geometry checks.
//! * [`config`], [`output`], [`verify`]: run configuration, VTK/CSV
//!   writers and the property suite used by the command-line tool.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fe_space;
pub mod flows;
pub mod forms;
pub mod lifting;
pub mod mesh;
pub mod metrics;
pub mod output;
pub mod presets;
pub mod quadrature;
pub mod scalar;
pub mod small;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};

/// Floating point type used by assembly, solvers and flows.
pub type Real = f64;
/// 2x2 matrix over [`Real`].
pub type Mat2 = small::Mat2<Real>;
/// Dense Cholesky factor over [`Real`].
pub type DenseCholesky = small::DenseCholesky<Real>;
/// One-dimensional quadrature rule over [`Real`].
pub type QuadRule1d = quadrature::QuadRule1d<Real>;
/// Tensor quadrature rule over [`Real`].
pub type QuadRule2d = quadrature::QuadRule2d<Real>;
/// Gauss-Lobatto Lagrange basis over [`Real`].
pub type LagrangeBasis1d = quadrature::LagrangeBasis1d<Real>;

pub use fe_space::{BoundaryData, BrokenField, BrokenSpace};
pub use mesh::{BoundaryRegion, Mesh};
pub use metrics::TargetMetric;
