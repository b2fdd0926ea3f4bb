//! Monte Carlo summaries with a summation order fixed by the data layout.
//!
//! Partial moments are accumulated per block of [`REDUCTION_BLOCK`] samples
//! (possibly in parallel) and merged left to right, so results do not depend
//! on thread scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::scalar::Scalar;

pub const REDUCTION_BLOCK: usize = 4096;

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<S> {
    pub value: S,
    pub std_error: S,
}

impl<S: Scalar> Estimate<S> {
    pub fn exact(value: S) -> Self {
        Estimate {
            value,
            std_error: S::zero(),
        }
    }

    /// `|value - target| <= k * std_error`.
    pub fn within(&self, target: S, k: S) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy)]
struct Moments<S> {
    n: usize,
    mean: S,
    m2: S,
}

impl<S: Scalar> Moments<S> {
    fn of(block: &[S]) -> Self {
        let mut m = Moments {
            n: 0,
            mean: S::zero(),
            m2: S::zero(),
        };
        for &x in block {
            m.n += 1;
            let delta = x - m.mean;
            m.mean = m.mean + delta / S::from_usize_lossy(m.n);
            m.m2 = m.m2 + delta * (x - m.mean);
        }
        m
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb, nn) = (
            S::from_usize_lossy(self.n),
            S::from_usize_lossy(other.n),
            S::from_usize_lossy(n),
        );
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * nb / nn,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nn,
        }
    }
}

fn moments<S: Scalar>(values: &[S]) -> Moments<S> {
    let partials: Vec<Moments<S>> = values.par_chunks(REDUCTION_BLOCK).map(Moments::of).collect();
    partials.into_iter().fold(
        Moments {
            n: 0,
            mean: S::zero(),
            m2: S::zero(),
        },
        Moments::merge,
    )
}

/// Sample mean with the standard error `s / sqrt(M)`.
pub fn mean_estimate<S: Scalar>(values: &[S]) -> Result<Estimate<S>> {
    if values.is_empty() {
        return Err(LabError::EmptyEnsemble);
    }
    let m = moments(values);
    let n = S::from_usize_lossy(m.n);
    let var = if m.n > 1 {
        m.m2 / (n - S::one())
    } else {
        S::zero()
    };
    Ok(Estimate {
        value: m.mean,
        std_error: (var / n).sqrt(),
    })
}

/// Unbiased sample variance.
pub fn sample_variance<S: Scalar>(values: &[S]) -> Result<S> {
    if values.len() < 2 {
        return Err(LabError::InvalidParameter(
            "variance needs at least two samples".into(),
        ));
    }
    let m = moments(values);
    Ok(m.m2 / (S::from_usize_lossy(m.n) - S::one()))
}

/// Deterministic blocked sum.
pub fn blocked_sum<S: Scalar>(values: &[S]) -> S {
    let partials: Vec<S> = values
        .par_chunks(REDUCTION_BLOCK)
        .map(|b| b.iter().copied().sum::<S>())
        .collect();
    partials.into_iter().fold(S::zero(), |a, b| a + b)
}

/// Share of the total carried by the largest 1% of the (nonnegative) values.
pub fn top_percentile_share<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let mut sorted: Vec<S> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let k = sorted.len().div_ceil(100);
    let total = blocked_sum(&sorted);
    if total <= S::zero() {
        return S::zero();
    }
    sorted[..k].iter().copied().sum::<S>() / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_zero_error() {
        let est = mean_estimate(&[2.5f64; 10_000]).unwrap();
        assert_eq!(est.value, 2.5);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn blocked_moments_match_two_pass() {
        let xs: Vec<f64> = (0..10_007).map(|i| ((i * 37 % 101) as f64).sqrt()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let est = mean_estimate(&xs).unwrap();
        assert!((est.value - mean).abs() < 1e-12);
        assert!((sample_variance(&xs).unwrap() - var).abs() < 1e-10);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(
            mean_estimate::<f64>(&[]),
            Err(LabError::EmptyEnsemble)
        ));
    }

    #[test]
    fn top_share_detects_concentration() {
        let mut xs = vec![1.0f64; 1000];
        xs[0] = 5000.0;
        assert!(top_percentile_share(&xs) > 0.5);
        assert!(top_percentile_share(&[1.0f64; 1000]) < 0.011);
    }
}
