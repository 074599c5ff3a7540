//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solver is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every `f64` is representable (possibly rounded).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for [`Real::lit`].
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

#[inline]
pub fn minmod2<T: Real>(a: T, b: T) -> T {
    if a > T::zero() && b > T::zero() {
        a.min(b)
    } else if a < T::zero() && b < T::zero() {
        a.max(b)
    } else {
        T::zero()
    }
}

#[inline]
pub fn minmod3<T: Real>(a: T, b: T, c: T) -> T {
    if a > T::zero() && b > T::zero() && c > T::zero() {
        a.min(b).min(c)
    } else if a < T::zero() && b < T::zero() && c < T::zero() {
        a.max(b).max(c)
    } else {
        T::zero()
    }
}
