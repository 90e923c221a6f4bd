//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the toolkit computes in: `f32` or `f64`.
///
/// The SI products formed in [`crate::bodies`] are ordered so that they stay
/// inside the `f32` range, but the tolerances used by the quadrature and the
/// Kepler solver are only meaningful in `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::PI() + Self::PI()
    }

    /// `max(floor, multiple·ε)`: a tolerance that degrades gracefully for `f32`.
    #[inline]
    fn tolerance(floor: f64, multiple: f64) -> Self {
        let eps = Self::epsilon().as_f64() * multiple;
        Self::lit(floor.max(eps))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
