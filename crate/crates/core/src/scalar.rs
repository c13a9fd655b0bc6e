//! Scalar abstraction shared by the reference-element kernels.
//!
//! Quadrature, one-dimensional bases and the 2x2 matrix helpers are written
//! against [`Scalar`] so they can be instantiated in `f32` for quick
//! experiments or in `f64` (the [`crate::Real`] used by assembly and solvers).

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type usable by the reference-element kernels.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
