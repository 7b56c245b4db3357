//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the math is generic over (`f32` or `f64`).
///
/// Method calls resolve through [`RealField`]; conversions go through
/// num-traits so generic code can lift `f64` literals without casts.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy lift of an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Real")
    }

    /// Widen to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the concrete type.
    fn epsilon() -> Self;
}

impl Real for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

/// Squared Euclidean norm of a slice.
pub fn norm_sq<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Euclidean norm of a slice.
pub fn norm<T: Real>(v: &[T]) -> T {
    norm_sq(v).sqrt()
}

/// Dot product; panics on length mismatch.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "max_abs_diff: length mismatch");
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}
