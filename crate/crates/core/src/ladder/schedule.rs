use serde::Serialize;

use crate::error::{invalid, Result};
use crate::integrability::TerminalValue;
use crate::scalar::Scalar;

/// Truncation levels `(n_j, p_j)`, both nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSchedule<S> {
    rungs: Vec<(S, S)>,
}

impl<S: Scalar> TruncationSchedule<S> {
    pub fn new(rungs: Vec<(S, S)>) -> Result<Self> {
        if rungs.len() < 3 {
            return invalid(format!("a truncation schedule needs at least 3 rungs, got {}", rungs.len()));
        }
        if rungs.iter().any(|&(n, p)| !(n > S::zero() && p > S::zero())) {
            return invalid("truncation levels must be positive");
        }
        if rungs.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return invalid("truncation levels must be nondecreasing");
        }
        Ok(TruncationSchedule { rungs })
    }

    /// `n_j = p_j = 2^j` for `j = from..=to`.
    pub fn dyadic(from: i32, to: i32) -> Result<Self> {
        if to < from {
            return invalid(format!("empty dyadic range {from}..={to}"));
        }
        Self::new((from..=to).map(|j| (S::lit(2f64.powi(j)), S::lit(2f64.powi(j)))).collect())
    }

    pub fn rungs(&self) -> &[(S, S)] {
        &self.rungs
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn top(&self) -> (S, S) {
        *self.rungs.last().expect("schedule has at least 3 rungs")
    }
}

/// `ξ⁺∧n − ξ⁻∧p`, i.e. `ξ` clamped to `[−p, n]`.
pub fn truncate_value<S: Scalar>(x: S, n: S, p: S) -> S {
    x.max(-p).min(n)
}

pub fn truncate_terminal<S: Scalar>(xi: &TerminalValue<S>, n: S, p: S) -> Result<TerminalValue<S>> {
    if !(n > S::zero() && p > S::zero()) {
        return invalid(format!("truncation levels must be positive, got n = {n}, p = {p}"));
    }
    let mut out = xi.map(format!("({})+ ^ {n} - ({})- ^ {p}", xi.description(), xi.description()), move |x| {
        truncate_value(x, n, p)
    });
    if xi.is_nonnegative() {
        out.set_nonnegative(true);
        if let Some(ln_abs) = xi.ln_abs_fn() {
            let ln_n = n.ln();
            out.set_ln_abs(Some(std::sync::Arc::new(move |w: S| ln_abs(w).min(ln_n))));
        }
    }
    Ok(out)
}
