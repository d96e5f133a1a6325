use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the whole crate computes in.
///
/// Implemented for `f32` and `f64`. Everything numeric (image planes, Gram
/// matrices, solver state) is parameterised over it; [`crate::Real`] fixes
/// the usual choice.
pub trait Scalar:
    'static
    + Send
    + Sync
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float")
    }

    #[inline]
    fn as_f32(self) -> f32 {
        self.to_f32().expect("finite float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
