use rayon::prelude::*;
use serde::Serialize;

use super::functions::ln_psi;
use super::quadrature::{gauss_expectation, GaussIntegrand, GaussOptions, GaussOutcome, TruncationEvidence};
use super::terminal::TerminalValue;
use crate::error::{invalid, Result};
use crate::scalar::{norm, Scalar};
use crate::stats::{mean_estimate, top_percentile_share};
use crate::stochastic::PathEnsemble;

/// Share of the Monte Carlo sum held by the top 1% of samples above which an
/// estimate is flagged unstable.
pub const UNSTABLE_TOP_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "functional")]
pub enum Functional<S> {
    /// `E[Ψ_λ(|ξ|)]`
    Psi { lambda: S },
    /// `E[|ξ|ᵖ]`
    Moment { p: S },
    /// `E[|ξ| lnᵖ(|ξ|+1)]`
    LogMoment { p: S },
    /// `E[|ξ| e^{γ|W_T|}]`
    ExpAbs { gamma: S },
    /// `E[|ξ| e^{γ W_T}]`
    ExpPlus { gamma: S },
    /// `E[|ξ| e^{−γ W_T}]`
    ExpMinus { gamma: S },
}

impl<S: Scalar> Functional<S> {
    pub fn name(&self) -> String {
        match self {
            Functional::Psi { lambda } => format!("E[psi_{lambda}(|xi|)]"),
            Functional::Moment { p } => format!("E[|xi|^{p}]"),
            Functional::LogMoment { p } => format!("E[|xi| log^{p}(|xi|+1)]"),
            Functional::ExpAbs { gamma } => format!("E[|xi| exp({gamma}|W_T|)]"),
            Functional::ExpPlus { gamma } => format!("E[|xi| exp({gamma} W_T)]"),
            Functional::ExpMinus { gamma } => format!("E[|xi| exp(-{gamma} W_T)]"),
        }
    }

    /// `ln` of the integrand given `ln|ξ|` and the terminal point `w` (first
    /// coordinate) with its Euclidean norm.
    fn ln_integrand(&self, ln_xi: S, w: S, w_norm: S) -> S {
        if ln_xi == S::neg_infinity() {
            return ln_xi;
        }
        match *self {
            Functional::Psi { lambda } => ln_psi(lambda, ln_xi),
            Functional::Moment { p } => p * ln_xi,
            Functional::LogMoment { p } => ln_xi + p * ln_xi.ln_1p_exp().ln(),
            Functional::ExpAbs { gamma } => ln_xi + gamma * w_norm,
            Functional::ExpPlus { gamma } => ln_xi + gamma * w,
            Functional::ExpMinus { gamma } => ln_xi - gamma * w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
    #[serde(rename = "quadrature")]
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum EntryOutcome<S> {
    /// Estimate with a standard error (Monte Carlo) or an error bound (quadrature).
    #[serde(rename = "FINITE")]
    Finite { value: S, error: S },
    #[serde(rename = "DIVERGENT")]
    Divergent(TruncationEvidence<S>),
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive(TruncationEvidence<S>),
}

impl<S: Scalar> EntryOutcome<S> {
    pub fn is_finite(&self) -> bool {
        matches!(self, EntryOutcome::Finite { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, EntryOutcome::Divergent(_))
    }

    pub fn value(&self) -> Option<S> {
        match self {
            EntryOutcome::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl<S: Scalar> From<GaussOutcome<S>> for EntryOutcome<S> {
    fn from(g: GaussOutcome<S>) -> Self {
        match g {
            GaussOutcome::Finite { value, error, .. } => EntryOutcome::Finite { value, error },
            GaussOutcome::Divergent(ev) => EntryOutcome::Divergent(ev),
            GaussOutcome::Inconclusive(ev) => EntryOutcome::Inconclusive(ev),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry<S> {
    pub functional: Functional<S>,
    pub name: String,
    pub method: Method,
    pub outcome: EntryOutcome<S>,
    /// Monte Carlo only: the top 1% of samples carry more than half the sum.
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport<S> {
    pub description: String,
    pub entries: Vec<ReportEntry<S>>,
}

impl<S: Scalar> IntegrabilityReport<S> {
    pub fn find(&self, functional: &Functional<S>) -> Option<&ReportEntry<S>> {
        self.entries.iter().find(|e| &e.functional == functional)
    }
}

/// Which functionals to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRequest<S> {
    pub lambdas: Vec<S>,
    pub moments: Vec<S>,
    pub gamma: S,
    pub horizon: S,
}

impl<S: Scalar> ReportRequest<S> {
    fn functionals(&self, one_dimensional: bool) -> Vec<Functional<S>> {
        let mut out: Vec<Functional<S>> = self.lambdas.iter().map(|&lambda| Functional::Psi { lambda }).collect();
        out.extend(self.moments.iter().map(|&p| Functional::Moment { p }));
        out.extend(self.moments.iter().map(|&p| Functional::LogMoment { p }));
        out.push(Functional::ExpAbs { gamma: self.gamma });
        if one_dimensional {
            out.push(Functional::ExpPlus { gamma: self.gamma });
            out.push(Functional::ExpMinus { gamma: self.gamma });
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.lambdas.iter().any(|&l| !(l > S::zero())) {
            return invalid("every lambda must be positive");
        }
        if self.moments.iter().any(|&p| !(p >= S::one())) {
            return invalid("every moment order p must be at least 1");
        }
        if !(self.gamma >= S::zero()) {
            return invalid("gamma must be nonnegative");
        }
        if !(self.horizon > S::zero()) {
            return invalid("horizon must be positive");
        }
        Ok(())
    }
}

/// Quadrature for one-dimensional Markovian `ξ`, Monte Carlo on `paths` otherwise.
pub fn integrability_report<S: Scalar>(
    xi: &TerminalValue<S>,
    request: &ReportRequest<S>,
    paths: Option<&PathEnsemble<S>>,
    options: &GaussOptions<S>,
) -> Result<IntegrabilityReport<S>> {
    if xi.is_markovian_1d() {
        return quadrature_report(xi, request, options);
    }
    match paths {
        Some(p) => monte_carlo_report(xi, request, p),
        None => invalid("a path ensemble is required for non-Markovian or multi-dimensional terminal values"),
    }
}

pub fn quadrature_report<S: Scalar>(
    xi: &TerminalValue<S>,
    request: &ReportRequest<S>,
    options: &GaussOptions<S>,
) -> Result<IntegrabilityReport<S>> {
    request.validate()?;
    if !xi.is_markovian_1d() {
        return invalid("quadrature needs a one-dimensional Markovian terminal value");
    }
    let sd = request.horizon.sqrt();
    let mut opts = options.clone();
    opts.breakpoints.extend(xi.kinks().iter().map(|&k| k / sd));
    let mut entries = Vec::new();
    for functional in request.functionals(true) {
        let lg = |x: S| {
            let w = sd * x;
            functional.ln_integrand(xi.ln_abs_1d(w), w, w.abs())
        };
        let outcome = gauss_expectation(&GaussIntegrand::LnMagnitude(&lg), &opts)?;
        entries.push(ReportEntry {
            functional,
            name: functional.name(),
            method: Method::Quadrature,
            outcome: outcome.into(),
            unstable: false,
        });
    }
    Ok(IntegrabilityReport {
        description: xi.description().to_string(),
        entries,
    })
}

pub fn monte_carlo_report<S: Scalar>(
    xi: &TerminalValue<S>,
    request: &ReportRequest<S>,
    paths: &PathEnsemble<S>,
) -> Result<IntegrabilityReport<S>> {
    request.validate()?;
    let values = xi.evaluate(paths)?;
    let terminal = paths.terminal_positions();
    let d = paths.dim();
    let mut entries = Vec::new();
    for functional in request.functionals(d == 1) {
        let samples: Vec<S> = values
            .par_iter()
            .zip(terminal.par_chunks(d))
            .map(|(&v, w)| functional.ln_integrand(v.abs().ln(), w[0], norm(w)).exp())
            .collect();
        let est = mean_estimate(&samples)?;
        let unstable = top_percentile_share(&samples) > S::lit(UNSTABLE_TOP_SHARE);
        entries.push(ReportEntry {
            functional,
            name: functional.name(),
            method: Method::MonteCarlo,
            outcome: EntryOutcome::Finite {
                value: est.value,
                error: est.std_error,
            },
            unstable,
        });
    }
    Ok(IntegrabilityReport {
        description: xi.description().to_string(),
        entries,
    })
}
