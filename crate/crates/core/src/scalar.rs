//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by the jet, tensor and fitting code: `f32` or `f64`.
///
/// `nalgebra::RealField` is required for the dense decompositions (inverse,
/// symmetric eigen, SVD). Both it and `num_traits::Float` expose `sqrt`,
/// `abs` and friends, so generic code calls those through `Float::` paths.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + nalgebra::RealField
    + Copy
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn abs<T: Scalar>(v: T) -> T {
    Float::abs(v)
}

#[inline]
pub(crate) fn sqrt<T: Scalar>(v: T) -> T {
    Float::sqrt(v)
}

#[inline]
pub(crate) fn fmax<T: Scalar>(a: T, b: T) -> T {
    Float::max(a, b)
}

#[inline]
pub(crate) fn is_finite<T: Scalar>(v: T) -> bool {
    Float::is_finite(v)
}
