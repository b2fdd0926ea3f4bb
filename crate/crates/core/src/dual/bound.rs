use rayon::prelude::*;
use serde::Serialize;

use super::generator::GeneratorSpec;
use crate::error::{LabError, Result};
use crate::integrability::{gauss_expectation, ln_psi, psi, GaussIntegrand, GaussOptions, GaussOutcome, TerminalValue};
use crate::lsmc::{conditional_expectation, RegressionBasis};
use crate::scalar::Scalar;
use crate::stochastic::PathEnsemble;

/// Number of lattice states per node for the quadrature route.
pub const BOUND_LATTICE: usize = 401;
/// Polynomial degree of the regression route.
pub const BOUND_REGRESSION_DEGREE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionalMethod {
    /// One-dimensional Gaussian quadrature on a lattice of states, linearly
    /// interpolated at the sampled states.
    Quadrature,
    /// Least-squares regression on Hermite polynomials of `W_{t_i}`.
    Regression,
}

/// `Y̅_{t_i}` on every sample, stored node-major.
#[derive(Debug, Clone, Serialize)]
pub struct BoundProcess<S> {
    lambda: S,
    method: ConditionalMethod,
    samples: usize,
    /// `E[Ψ_λ(|ξ|) | F_{t_i}]`, node-major.
    psi_expectation: Vec<S>,
    values: Vec<S>,
}

impl<S: Scalar> BoundProcess<S> {
    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn method(&self) -> ConditionalMethod {
        self.method
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.samples
    }

    pub fn at(&self, m: usize, i: usize) -> S {
        self.values[i * self.samples + m]
    }

    pub fn node(&self, i: usize) -> &[S] {
        &self.values[i * self.samples..(i + 1) * self.samples]
    }

    pub fn psi_expectation(&self, i: usize) -> &[S] {
        &self.psi_expectation[i * self.samples..(i + 1) * self.samples]
    }

    /// Node-major values `[i][m]`.
    pub fn values(&self) -> &[S] {
        &self.values
    }
}

/// Rejects `λγ²T ≥ 1`.
pub fn check_sufficiency<S: Scalar>(lambda: S, gamma: S, horizon: S) -> Result<()> {
    if !(lambda > S::zero()) || !lambda.is_finite() {
        return Err(LabError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let product = lambda * gamma * gamma * horizon;
    if !(product < S::one()) {
        return Err(LabError::SufficiencyViolated {
            product: product.as_f64(),
        });
    }
    Ok(())
}

/// `e^{β(T−t)}(1/√(1−λγ²(T−t)) + e^{2/λ} E[Ψ_λ(|ξ|) | F_t]) + ∫_t^T e^{β(s−t)}α_s ds`
/// at every node and sample.
pub fn apriori_bound<S: Scalar>(
    xi: &TerminalValue<S>,
    gen: &GeneratorSpec<S>,
    lambda: S,
    paths: &PathEnsemble<S>,
) -> Result<BoundProcess<S>> {
    let grid = paths.grid();
    let horizon = grid.horizon();
    check_sufficiency(lambda, gen.gamma(), horizon)?;
    let (n, samples) = (grid.steps(), paths.samples());
    let terminal: Vec<S> = xi
        .evaluate(paths)?
        .par_iter()
        .map(|&x| psi(lambda, x.abs()))
        .collect::<Result<_>>()?;

    let quadrature = xi.is_markovian_1d() && paths.dim() == 1;
    let method = if quadrature {
        ConditionalMethod::Quadrature
    } else {
        ConditionalMethod::Regression
    };
    let basis = RegressionBasis::polynomial(BOUND_REGRESSION_DEGREE)?;
    let mut psi_expectation = Vec::with_capacity((n + 1) * samples);
    for i in 0..n {
        let node_values = if quadrature {
            let states = paths.positions(i);
            lattice_psi_expectation(xi, lambda, grid.remaining(i), &states)?
        } else {
            let (fitted, _) = conditional_expectation(&basis, paths, i, &terminal)?;
            fitted.into_iter().map(|v| v.max(S::zero())).collect()
        };
        psi_expectation.extend(node_values);
    }
    psi_expectation.extend_from_slice(&terminal);

    let e2l = (S::lit(2.0) / lambda).exp();
    let mut values = vec![S::zero(); (n + 1) * samples];
    for i in 0..=n {
        let tau = grid.remaining(i);
        let discount = (gen.beta() * tau).exp();
        let moment = S::one() / (S::one() - lambda * gen.gamma() * gen.gamma() * tau).sqrt();
        let drift = gen.alpha_integral(grid.time(i), horizon)?;
        let src = &psi_expectation[i * samples..(i + 1) * samples];
        values[i * samples..(i + 1) * samples]
            .par_iter_mut()
            .zip(src)
            .for_each(|(v, &e)| *v = discount * (moment + e2l * e) + drift);
    }
    Ok(BoundProcess {
        lambda,
        method,
        samples,
        psi_expectation,
        values,
    })
}

/// `E[Ψ_λ(|g(w + √τ X)|)]` for a single state `w`.
pub fn conditional_psi_expectation<S: Scalar>(
    xi: &TerminalValue<S>,
    lambda: S,
    tau: S,
    w: S,
) -> Result<S> {
    if !(tau > S::zero()) {
        return psi(lambda, xi.eval_1d(w).abs());
    }
    let s = tau.sqrt();
    let ln_integrand = |x: S| ln_psi(lambda, xi.ln_abs_1d(w + s * x));
    let options = GaussOptions {
        breakpoints: std::iter::once(S::zero())
            .chain(xi.kinks().iter().map(|&k| (k - w) / s))
            .collect(),
        ..Default::default()
    };
    match gauss_expectation(&GaussIntegrand::LnMagnitude(&ln_integrand), &options)? {
        GaussOutcome::Finite { value, .. } => Ok(value),
        other => Err(LabError::NotIntegrable(format!(
            "E[Psi_{lambda}(|xi|) | W = {w}] over remaining time {tau} is {}",
            other.status()
        ))),
    }
}

fn lattice_psi_expectation<S: Scalar>(xi: &TerminalValue<S>, lambda: S, tau: S, states: &[S]) -> Result<Vec<S>> {
    let lo = states.iter().copied().fold(S::infinity(), S::min);
    let hi = states.iter().copied().fold(S::neg_infinity(), S::max);
    if !(hi - lo > S::lit(1e-12) * (S::one() + lo.abs())) {
        let v = conditional_psi_expectation(xi, lambda, tau, lo)?;
        return Ok(vec![v; states.len()]);
    }
    let step = (hi - lo) / S::from_usize_lossy(BOUND_LATTICE - 1);
    let table: Vec<S> = (0..BOUND_LATTICE)
        .into_par_iter()
        .map(|k| conditional_psi_expectation(xi, lambda, tau, lo + step * S::from_usize_lossy(k)))
        .collect::<Result<_>>()?;
    Ok(states
        .par_iter()
        .map(|&w| {
            let pos = ((w - lo) / step).max(S::zero());
            let k = pos.floor().to_usize().unwrap_or(0).min(BOUND_LATTICE - 2);
            let frac = (pos - S::from_usize_lossy(k)).min(S::one());
            table[k] + frac * (table[k + 1] - table[k])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::generator::Alpha;
    use crate::integrability::catalog;
    use crate::stochastic::TimeGrid;

    #[test]
    fn zero_terminal_value_leaves_moment_constant() {
        let grid = TimeGrid::uniform(1.0f64, 4).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 100, 1).unwrap();
        let gen = GeneratorSpec::gamma_abs_z(0.5).unwrap();
        let b = apriori_bound(&catalog::constant(0.0), &gen, 2.0, &paths).unwrap();
        assert!((b.at(0, 0) - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.at(17, 4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sufficiency_is_enforced() {
        let grid = TimeGrid::uniform(1.0f64, 4).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 10, 1).unwrap();
        let gen = GeneratorSpec::gamma_abs_z(1.0).unwrap();
        let err = apriori_bound(&catalog::constant(0.0), &gen, 1.0, &paths).unwrap_err();
        assert!(matches!(err, LabError::SufficiencyViolated { .. }));
    }

    #[test]
    fn discounted_drift_terms() {
        // β = 1, α ≡ 1, λ = 2, γ = 0.5, T = 1 and Ψ-term made equal to 1 by a
        // constant ξ with Ψ_2(c) = 1.
        let c = solve_psi_equals_one(2.0);
        let grid = TimeGrid::uniform(1.0f64, 2).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 4, 1).unwrap();
        let gen = GeneratorSpec::typical(Alpha::Constant(1.0), 1.0, 0.5).unwrap();
        let b = apriori_bound(&catalog::constant(c), &gen, 2.0, &paths).unwrap();
        assert!((b.at(0, 0) - 12.951568955548812).abs() < 1e-9);
    }

    fn solve_psi_equals_one(lambda: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi(lambda, mid).unwrap() < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quadrature_and_regression_agree() {
        let grid = TimeGrid::uniform(1.0f64, 4).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 20_000, 5).unwrap();
        let gen = GeneratorSpec::gamma_abs_z(0.5).unwrap();
        let xi = catalog::exp_abs(0.5);
        let quad = apriori_bound(&xi, &gen, 2.0, &paths).unwrap();
        assert_eq!(quad.method(), ConditionalMethod::Quadrature);
        let path_form = TerminalValue::path_dependent("e^{|W_T|/2}", |p: &crate::stochastic::PathView<'_, f64>| {
            (0.5 * p.current()[0].abs()).exp()
        });
        let reg = apriori_bound(&path_form, &gen, 2.0, &paths).unwrap();
        assert_eq!(reg.method(), ConditionalMethod::Regression);
        // Unconditional expectation at t = 0: quadrature vs the sample mean.
        let rel = (quad.at(0, 0) - reg.at(0, 0)).abs() / quad.at(0, 0);
        assert!(rel < 0.02, "relative gap {rel}");
        // E[Ψ_2(e^{|W|/2})] = 4.2404964120283
        assert!((quad.psi_expectation(0)[0] - 4.2404964120283).abs() < 1e-7);
    }

    #[test]
    fn bound_dominates_its_constant_part() {
        let grid = TimeGrid::uniform(1.0f64, 5).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 2000, 9).unwrap();
        let gen = GeneratorSpec::typical(Alpha::Constant(0.3), 0.2, 0.5).unwrap();
        let b = apriori_bound(&catalog::clamp(-2.0, 2.0), &gen, 2.0, &paths).unwrap();
        for i in 0..=5 {
            let tau = grid.remaining(i);
            let floor = (0.2 * tau).exp() / (1.0 - 0.5 * tau).sqrt() + gen.alpha_integral(grid.time(i), 1.0).unwrap();
            assert!(b.node(i).iter().all(|&v| v >= floor));
        }
    }
}
