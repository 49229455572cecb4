//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the model is evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or measurement.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln(exp(x) - 1)` for `x > 0`, accurate at both ends of the range.
pub fn ln_expm1<F: Scalar>(x: F) -> F {
    if x > F::one() {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(sum(exp(xs)))` without overflow. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<F: Scalar>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<F>().ln()
}
