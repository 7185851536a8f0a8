//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating-point type the algorithms are written against.
///
/// Implemented for `f32` and `f64`. Tolerances in this crate are quoted for
/// double precision; [`Real::tol`] rescales them for narrower types.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rescales a double-precision tolerance to this type's precision.
    ///
    /// The factor is `sqrt(eps_T / eps_f64)`, i.e. 1 for `f64` and about
    /// `2.3e4` for `f32`.
    fn tol(x: f64) -> Self {
        let ratio = (Self::default_epsilon().as_f64() / f64::EPSILON).max(1.0);
        Self::lit(x * ratio.sqrt())
    }

    fn is_finite_val(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
