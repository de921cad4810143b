//! Floating-point abstraction so the same kernels run in `f32` for training
//! and in `f64` for finite-difference gradient verification.

use num_traits::{Float, FloatConst, NumAssign};

/// Scalar type used throughout the numeric kernels.
pub trait Real:
    Float + FloatConst + NumAssign + Copy + Send + Sync + core::fmt::Debug + core::fmt::Display + 'static
{
    fn of(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}
