//! Scalar abstraction for the geometric core.
//!
//! All core math is generic over [`Real`], which is implemented for `f32`
//! and `f64`. The pipeline and file formats work in `f64`; see the type
//! aliases at the crate root.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the geometric core.
pub trait Real: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {
    /// Machine epsilon of the concrete type.
    const EPS: Self;
    /// A positive value far below any meaningful magnitude, used to guard
    /// divisions in continued fractions.
    const TINY: Self;
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;
    const TINY: Self = 1e-30;
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;
    const TINY: Self = 1e-290;
}

/// Casts an `f64` constant into the working scalar type.
#[inline]
pub fn real<S: Real>(v: f64) -> S {
    nalgebra::convert(v)
}
