//! The integrability functionals `Ψ_λ(x) = x exp(sqrt(2/λ · ln(x+1)))` and
//! `Φ_λ(x) = exp(λ/2 · ln²x)`, the Young-type pairing between them, and the
//! comparison functions that place `Ψ_λ`-integrability between `L¹` and `Lᵖ`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{ln_add_exp, Scalar};

fn check_lambda<S: Scalar>(lambda: S) -> Result<()> {
    if !(lambda > S::zero()) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    Ok(())
}

/// `Ψ_λ(x)` for `x >= 0`.
pub fn psi<S: Scalar>(lambda: S, x: S) -> Result<S> {
    check_lambda(lambda)?;
    if !(x >= S::zero()) {
        return invalid(format!("psi is defined on [0, inf), got {x}"));
    }
    Ok(x * (S::lit(2.0) / lambda * x.ln_1p()).sqrt().exp())
}

/// `ln Ψ_λ(x)` given `ln x` (may be `-inf`). Never overflows.
pub fn ln_psi<S: Scalar>(lambda: S, ln_x: S) -> S {
    if ln_x == S::neg_infinity() {
        return ln_x;
    }
    ln_x + (S::lit(2.0) / lambda * ln_x.ln_1p_exp()).sqrt()
}

/// `Φ_λ(x)` for `x > 0`.
pub fn phi<S: Scalar>(lambda: S, x: S) -> Result<S> {
    check_lambda(lambda)?;
    if !(x > S::zero()) {
        return invalid(format!("phi is defined on (0, inf), got {x}"));
    }
    let l = x.ln();
    Ok((S::lit(0.5) * lambda * l * l).exp())
}

/// `Φ_λ(e^u) = exp(λ u² / 2)`, evaluated without forming `e^u`.
pub fn phi_of_exp<S: Scalar>(lambda: S, u: S) -> S {
    (S::lit(0.5) * lambda * u * u).exp()
}

/// `Φ_λ(e^x) + e^{2/λ} Ψ_λ(y) − e^x y`, which is nonnegative for all `x` and `y >= 0`.
///
/// Evaluated in linear space, so it saturates to `+inf` once `Φ_λ(e^x)` overflows.
pub fn young_gap<S: Scalar>(lambda: S, x: S, y: S) -> Result<S> {
    let psi_y = psi(lambda, y)?;
    let coupling = if y == S::zero() { S::zero() } else { x.exp() * y };
    Ok(phi_of_exp(lambda, x) + (S::lit(2.0) / lambda).exp() * psi_y - coupling)
}

/// The Young gap divided by `max(1, Φ_λ(e^x), e^{2/λ} Ψ_λ(y))`, computed in
/// log space so that it stays finite over the whole parameter range.
pub fn young_relative_gap<S: Scalar>(lambda: S, x: S, y: S) -> Result<S> {
    check_lambda(lambda)?;
    if !(y >= S::zero()) {
        return invalid(format!("y must be nonnegative, got {y}"));
    }
    let ln_phi = S::lit(0.5) * lambda * x * x;
    let ln_y = y.ln();
    let ln_psi_term = S::lit(2.0) / lambda + ln_psi(lambda, ln_y);
    let ln_coupling = x + ln_y;
    let scale = S::zero().max(ln_phi).max(ln_psi_term);
    let positive = ln_add_exp(ln_phi - scale, ln_psi_term - scale).exp();
    Ok(positive - (ln_coupling - scale).exp())
}

/// The chain `x <= Ψ_λ(x) <= e^{1/(2ελ)} x (x+1)^ε`, together with the
/// lower-order functional `x lnᵖ(x+1)` that `Ψ_λ` eventually dominates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich<S> {
    pub lower: S,
    pub psi: S,
    pub upper: S,
    pub log_moment: S,
}

impl<S: Scalar> Sandwich<S> {
    pub fn is_ordered(&self) -> bool {
        self.lower <= self.psi && self.psi <= self.upper
    }
}

pub fn remark_sandwich<S: Scalar>(lambda: S, eps: S, p: S, x: S) -> Result<Sandwich<S>> {
    if !(eps > S::zero()) {
        return invalid(format!("epsilon must be positive, got {eps}"));
    }
    if !(p >= S::one()) {
        return invalid(format!("p must be at least 1, got {p}"));
    }
    let psi_x = psi(lambda, x)?;
    let upper = (S::one() / (S::lit(2.0) * eps * lambda)).exp() * x * (x + S::one()).powf(eps);
    Ok(Sandwich {
        lower: x,
        psi: psi_x,
        upper,
        log_moment: x * x.ln_1p().powf(p),
    })
}
