use serde::Serialize;

use crate::error::{invalid, Result};
use crate::integrability::{gauss_expectation, GaussIntegrand, GaussOptions, GaussOutcome, TerminalValue};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct NecessityEntry<S> {
    pub name: String,
    pub outcome: GaussOutcome<S>,
}

/// Integrability of `ξ e^{γW_T}`, `ξ e^{−γW_T}` and `ξ e^{γ|W_T|}`: a
/// nonnegative solution of the equation with generator `γ|z|` can only exist
/// when all three are finite.
#[derive(Debug, Clone, Serialize)]
pub struct NecessityReport<S> {
    pub entries: Vec<NecessityEntry<S>>,
    pub pass: bool,
}

pub fn necessity_check<S: Scalar>(xi: &TerminalValue<S>, gamma: S, horizon: S) -> Result<NecessityReport<S>> {
    if !xi.is_markovian_1d() || !xi.is_nonnegative() {
        return invalid("the necessity check needs a nonnegative g(W_T) with d = 1");
    }
    if !(gamma > S::zero()) || !(horizon > S::zero()) {
        return invalid("gamma and the horizon must be positive");
    }
    let s = horizon.sqrt();
    let gs = gamma * s;
    let options = GaussOptions {
        breakpoints: std::iter::once(S::zero())
            .chain(xi.kinks().iter().map(|&k| k / s))
            .collect(),
        ..Default::default()
    };
    type Exponent<'a, S> = Box<dyn Fn(S) -> S + Sync + 'a>;
    let exponents: [(&str, Exponent<S>); 3] = [
        ("E[xi exp(gamma W_T)]", Box::new(move |x: S| gs * x)),
        ("E[xi exp(-gamma W_T)]", Box::new(move |x: S| -gs * x)),
        ("E[xi exp(gamma |W_T|)]", Box::new(move |x: S| gs * x.abs())),
    ];
    let mut entries = Vec::with_capacity(3);
    for (name, exponent) in exponents.iter() {
        let ln_integrand = |x: S| xi.ln_abs_1d(s * x) + exponent(x);
        let outcome = gauss_expectation(&GaussIntegrand::LnMagnitude(&ln_integrand), &options)?;
        entries.push(NecessityEntry {
            name: name.to_string(),
            outcome,
        });
    }
    let pass = entries.iter().all(|e| e.outcome.is_finite());
    Ok(NecessityReport { entries, pass })
}
