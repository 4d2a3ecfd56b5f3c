//! Scalar abstraction for similarity scores and evaluation metrics.
//!
//! Everything that produces a fraction (phrase similarity, alignment
//! thresholds, EM/F1/BLEU) is generic over [`Score`], so the same code runs
//! in `f32` for memory-bound batch scoring and `f64` for the reference
//! metrics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// A floating point score type: `f32` or `f64`.
pub trait Score: Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static {
    /// Lossless-enough conversion from a count or ratio.
    fn of(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("finite f64 is representable")
    }

    /// Ratio of two counts; `0` when the denominator is zero.
    fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::of(num as f64) / Self::of(den as f64)
        }
    }

    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn hundred() -> Self {
        Self::of(100.0)
    }
}

impl Score for f32 {}
impl Score for f64 {}
