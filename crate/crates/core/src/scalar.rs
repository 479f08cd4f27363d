//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Linear algebra goes through nalgebra's `RealField`; conversions to and
/// from literals and file values go through num-traits.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Display + LowerExp + Debug + Send + Sync
{
    /// Machine epsilon of the type.
    fn eps() -> Self {
        Self::default_epsilon()
    }

    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
