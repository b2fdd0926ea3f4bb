//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the laboratory is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every literal used in the crate is representable in `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln(1 + e^x)` without overflow for large `x`.
    #[inline]
    fn ln_1p_exp(self) -> Self {
        if self > Self::zero() {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }

    /// Sign with the convention `sgn(0) = +1`.
    #[inline]
    fn sign_plus(self) -> Self {
        if self >= Self::zero() {
            Self::one()
        } else {
            -Self::one()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm of a short vector.
pub(crate) fn norm<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
}

/// `ln(e^a + e^b)` evaluated stably.
pub(crate) fn ln_add_exp<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_1p_exp_matches_direct_form() {
        for &x in &[-30.0f64, -1.0, 0.0, 0.5, 10.0] {
            assert!((x.ln_1p_exp() - (1.0 + x.exp()).ln()).abs() < 1e-14);
        }
        assert_eq!(800.0f64.ln_1p_exp(), 800.0);
    }

    #[test]
    fn sign_of_zero_is_positive() {
        assert_eq!(0.0f64.sign_plus(), 1.0);
        assert_eq!((-0.0f32).sign_plus(), 1.0);
        assert_eq!((-2.0f64).sign_plus(), -1.0);
    }

    #[test]
    fn ln_add_exp_handles_infinities() {
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((ln_add_exp(0.0f64, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((ln_add_exp(1000.0f64, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
