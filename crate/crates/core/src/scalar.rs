//! Scalar abstraction shared by every kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the discretization is generic over.
///
/// Implemented for `f32` and `f64`. All tolerances in the crate are stated
/// for `f64`; `f32` is supported for the operators and quadrature but the
/// default solver tolerances are below its resolution.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for finite literals and the two supported types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Cubic smoothstep on `[0, 1]`, clamped outside.
pub(crate) fn smoothstep<T: Real>(s: T) -> T {
    let s = s.max(T::zero()).min(T::one());
    s * s * (T::of(3.0) - T::two() * s)
}
