//! Floating-point scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + LinalgScalar
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    fn from_f(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to scalar")
    }

    fn from_n(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize converts to scalar")
    }

    fn to_f64x(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
