//! Floating-point abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the fitting and scoring code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are stated in absolute
/// terms (convergence thresholds, weight floors) are converted through
/// [`Scalar::lit`], so they saturate sensibly for the narrower type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// One-half, used for tie credit in concordance counts.
    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Indicator as a scalar: `1` for `true`, `0` for `false`.
#[inline]
pub fn indicator<T: Scalar>(flag: bool) -> T {
    if flag {
        T::one()
    } else {
        T::zero()
    }
}
