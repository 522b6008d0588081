//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating-point scalar: `f32` or `f64`.
///
/// Rank decisions and tolerances scale with [`RealField::default_epsilon`],
/// so the same code runs in either precision. Reported values (residuals,
/// defects) are widened to `f64` through [`ToPrimitive`].
pub trait Scalar: RealField + Copy + ToPrimitive + Debug + Display {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Widens a scalar to `f64` for reporting.
#[inline]
pub fn widen<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
