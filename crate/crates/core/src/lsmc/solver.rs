use std::hash::{DefaultHasher, Hasher};

use rayon::prelude::*;
use serde::Serialize;

use super::basis::{least_squares, FitDiagnostics, RegressionBasis};
use crate::dual::GeneratorSpec;
use crate::error::{invalid, LabError, Result};
use crate::integrability::TerminalValue;
use crate::scalar::Scalar;
use crate::stats::Estimate;
use crate::stochastic::{PathEnsemble, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Fixed-point iterations allowed for the implicit `y` step.
    pub max_iterations: usize,
    /// Stop when successive iterates differ by at most `tolerance · max(1, |y|)`.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDiagnostics<S> {
    pub node: usize,
    /// Largest fixed-point iteration count over the samples.
    pub iterations: usize,
    pub fit: FitDiagnostics<S>,
    /// Root-mean-square standard error of the fitted `E[Y_{i+1} | W_{t_i}]`.
    pub value_se: S,
    /// Same for the first coordinate of `Z_{t_i}`.
    pub z_se: S,
}

/// Where the paths of a solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedLineage {
    pub seed: Option<u64>,
    pub chunk_size: usize,
    pub samples: usize,
    pub steps: usize,
    /// Hash of the raw increments, to tell ensembles apart.
    pub fingerprint: u64,
}

impl SeedLineage {
    pub fn of<S: Scalar>(paths: &PathEnsemble<S>) -> Self {
        let mut h = DefaultHasher::new();
        for &x in paths.increments() {
            h.write_u64(x.as_f64().to_bits());
        }
        SeedLineage {
            seed: paths.seed(),
            chunk_size: paths.chunk_size(),
            samples: paths.samples(),
            steps: paths.steps(),
            fingerprint: h.finish(),
        }
    }
}

/// Discrete solution `(Y, Z)` on the grid: `Y` at nodes `0..=N`, `Z` at
/// nodes `0..N`, both stored per node over samples.
#[derive(Debug, Clone, Serialize)]
pub struct BsdeSolution<S> {
    #[serde(skip)]
    grid: TimeGrid<S>,
    dim: usize,
    basis: RegressionBasis,
    lineage: SeedLineage,
    y0: Estimate<S>,
    diagnostics: Vec<NodeDiagnostics<S>>,
    #[serde(skip)]
    y: Vec<Vec<S>>,
    #[serde(skip)]
    z: Vec<Vec<S>>,
    #[serde(skip)]
    pathwise: Vec<S>,
}

impl<S: Scalar> BsdeSolution<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.lineage.samples
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn basis(&self) -> &RegressionBasis {
        &self.basis
    }

    pub fn lineage(&self) -> &SeedLineage {
        &self.lineage
    }

    /// `Y_0`, with the standard error of the sample mean of
    /// `ξ + Σ_i Δ_i f(t_i, Y_{t_i}, Z_{t_i})` along the paths.
    pub fn y0(&self) -> Estimate<S> {
        self.y0
    }

    pub fn y(&self, m: usize, i: usize) -> S {
        self.y[i][m]
    }

    pub fn y_node(&self, i: usize) -> &[S] {
        &self.y[i]
    }

    pub fn z(&self, m: usize, i: usize) -> &[S] {
        &self.z[i][m * self.dim..(m + 1) * self.dim]
    }

    /// `Z_{t_i}` laid out `[m][k]`.
    pub fn z_node(&self, i: usize) -> &[S] {
        &self.z[i]
    }

    pub fn z_nodes(&self) -> &[Vec<S>] {
        &self.z
    }

    /// Per-path `ξ + Σ_i Δ_i f(t_i, Y_{t_i}, Z_{t_i})`; its sample mean is `Y_0`.
    pub fn pathwise(&self) -> &[S] {
        &self.pathwise
    }

    pub fn diagnostics(&self) -> &[NodeDiagnostics<S>] {
        &self.diagnostics
    }

    /// Whether both solutions were computed on the same grid, paths and basis.
    pub fn same_setup(&self, other: &Self) -> bool {
        self.lineage == other.lineage
            && self.dim == other.dim
            && self.basis == other.basis
            && self.grid.nodes() == other.grid.nodes()
    }
}

fn check_setup<S: Scalar>(
    gen: &GeneratorSpec<S>,
    paths: &PathEnsemble<S>,
    basis: &RegressionBasis,
    options: &SolverOptions,
) -> Result<()> {
    let grid = paths.grid();
    if let Some(i) = (0..grid.steps()).find(|&i| !(gen.beta() * grid.dt(i) < S::one())) {
        return invalid(format!(
            "beta * dt = {} >= 1 at step {i}: the implicit step is not a contraction",
            gen.beta() * grid.dt(i)
        ));
    }
    let k = basis.size(paths.dim());
    if paths.samples() < 10 * k {
        return invalid(format!(
            "{} samples are fewer than 10 x basis size {k}",
            paths.samples()
        ));
    }
    if options.max_iterations == 0 || !(options.tolerance > 0.0) {
        return invalid("fixed-point iteration needs a positive budget and tolerance");
    }
    Ok(())
}

/// Backward least-squares Monte Carlo scheme.
pub fn solve<S: Scalar>(
    xi: &TerminalValue<S>,
    gen: &GeneratorSpec<S>,
    paths: &PathEnsemble<S>,
    basis: &RegressionBasis,
    options: &SolverOptions,
) -> Result<BsdeSolution<S>> {
    check_setup(gen, paths, basis, options)?;
    let terminal = xi.evaluate(paths)?;
    solve_from_terminal(terminal, gen, paths, basis, options)
}

/// As [`solve`], with `ξ` already evaluated on every sample.
pub fn solve_from_terminal<S: Scalar>(
    terminal: Vec<S>,
    gen: &GeneratorSpec<S>,
    paths: &PathEnsemble<S>,
    basis: &RegressionBasis,
    options: &SolverOptions,
) -> Result<BsdeSolution<S>> {
    check_setup(gen, paths, basis, options)?;
    if terminal.len() != paths.samples() {
        return Err(LabError::EnsembleMismatch(format!(
            "{} terminal values against {} paths",
            terminal.len(),
            paths.samples()
        )));
    }
    let grid = paths.grid().clone();
    let (n, d, samples) = (grid.steps(), paths.dim(), paths.samples());
    let tol = S::lit(options.tolerance);

    let mut y: Vec<Vec<S>> = vec![Vec::new(); n + 1];
    let mut z: Vec<Vec<S>> = vec![Vec::new(); n];
    let mut diagnostics = Vec::with_capacity(n);
    // Per-path ξ + Σ_i Δ_i f(t_i, Y_i, Z_i), whose sample mean is Y_0.
    let mut pathwise = terminal.clone();
    y[n] = terminal;
    for i in (0..n).rev() {
        let (t, dt) = (grid.time(i), grid.dt(i));
        let states = paths.positions(i);
        let design = basis.design(t, &states, d);
        let next = &y[i + 1];
        let mut responses: Vec<Vec<S>> = Vec::with_capacity(d);
        for k in 0..d {
            responses.push(
                (0..samples)
                    .into_par_iter()
                    .map(|m| next[m] * paths.increment(m, i)[k] / dt)
                    .collect(),
            );
        }
        let mut refs: Vec<&[S]> = vec![next.as_slice()];
        refs.extend(responses.iter().map(|r| r.as_slice()));
        let fit = least_squares(&design, &refs)?;
        drop(responses);
        let c_hat = fit.predict(&design, 0);
        let mut z_node = vec![S::zero(); samples * d];
        for k in 0..d {
            let zk = fit.predict(&design, 1 + k);
            z_node.par_chunks_mut(d).zip(zk).for_each(|(row, v)| row[k] = v);
        }

        let outcomes: Vec<(S, usize)> = c_hat
            .par_iter()
            .zip(z_node.par_chunks(d))
            .map(|(&c, zm)| {
                let mut cur = c;
                for it in 1..=options.max_iterations {
                    let nxt = c + dt * gen.eval(t, cur, zm);
                    let done = (nxt - cur).abs() <= tol * cur.abs().max(S::one());
                    cur = nxt;
                    if done {
                        return (cur, it);
                    }
                }
                (cur, usize::MAX)
            })
            .collect();
        if let Some(m) = outcomes.iter().position(|o| o.1 == usize::MAX) {
            return Err(LabError::NonConvergence { node: i, sample: m });
        }
        let iterations = outcomes.iter().map(|o| o.1).max().unwrap_or(0);
        diagnostics.push(NodeDiagnostics {
            node: i,
            iterations,
            fit: fit.diagnostics,
            value_se: fit.fitted_se(0, samples),
            z_se: fit.fitted_se(1, samples),
        });
        y[i] = outcomes.into_iter().map(|o| o.0).collect();
        pathwise
            .par_iter_mut()
            .zip(&y[i])
            .zip(&c_hat)
            .for_each(|((p, &yi), &c)| *p = *p + (yi - c));
        z[i] = z_node;
    }
    diagnostics.reverse();
    let y0 = Estimate {
        value: y[0][0],
        std_error: crate::stats::mean_estimate(&pathwise)?.std_error,
    };
    Ok(BsdeSolution {
        grid,
        dim: d,
        basis: *basis,
        lineage: SeedLineage::of(paths),
        y0,
        diagnostics,
        y,
        z,
        pathwise,
    })
}

/// `Y(t, w)` for `ξ = g(W_T)` with `g` nondecreasing under the typical
/// generator, where the constant control `q ≡ γ` is optimal:
/// `Y(t, w) = e^{β(T−t)} E[g(w + γ(T−t) + √(T−t) X)] + ∫_t^T e^{β(s−t)} α_s ds`.
///
/// With `β > 0` the `β|y|` term coincides with `βy` only while `Y ≥ 0`, so
/// `g` must then be nonnegative (and `α ≥ 0` is assumed).
pub struct ClosedFormOracle<S> {
    xi: TerminalValue<S>,
    gen: GeneratorSpec<S>,
    horizon: S,
}

/// Scan range and resolution of the monotonicity check.
const MONOTONE_SCAN: (f64, f64, usize) = (-20.0, 20.0, 40_001);

pub fn closed_form_oracle<S: Scalar>(
    xi: &TerminalValue<S>,
    gen: &GeneratorSpec<S>,
    horizon: S,
) -> Result<ClosedFormOracle<S>> {
    if !(xi.is_markovian() && xi.dim().is_none_or(|d| d == 1)) {
        return Err(LabError::OracleInvalid("terminal value must be g(W_T) with d = 1".into()));
    }
    if !gen.is_typical() {
        return Err(LabError::OracleInvalid("generator must be alpha + beta|y| + gamma|z|".into()));
    }
    let (lo, hi, count) = MONOTONE_SCAN;
    let step = (hi - lo) / (count - 1) as f64;
    let mut prev = xi.eval_1d(S::lit(lo));
    let mut min = prev;
    for j in 1..count {
        let x = S::lit(lo + step * j as f64);
        let g = xi.eval_1d(x);
        if g < prev - S::lit(1e-12) * prev.abs().max(S::one()) {
            return Err(LabError::OracleInvalid(format!(
                "g is not nondecreasing: g({x}) = {g} < {prev}"
            )));
        }
        prev = g;
        min = min.min(g);
    }
    if gen.beta() > S::zero() && min < S::zero() {
        return Err(LabError::OracleInvalid(
            "with beta > 0 the oracle needs a nonnegative g".into(),
        ));
    }
    Ok(ClosedFormOracle {
        xi: xi.clone(),
        gen: gen.clone(),
        horizon,
    })
}

impl<S: Scalar> ClosedFormOracle<S> {
    pub fn value(&self, t: S, w: S) -> Result<S> {
        use crate::integrability::{gauss_expectation, GaussIntegrand, GaussOptions, GaussOutcome};
        if !(t >= S::zero() && t <= self.horizon) {
            return invalid(format!("time {t} outside [0, {}]", self.horizon));
        }
        let tau = self.horizon - t;
        let drift = self.gen.alpha_integral(t, self.horizon)?;
        if tau == S::zero() {
            return Ok(self.xi.eval_1d(w) + drift);
        }
        let (shift, s) = (w + self.gen.gamma() * tau, tau.sqrt());
        let g = |x: S| self.xi.eval_1d(shift + s * x);
        let options = GaussOptions {
            breakpoints: std::iter::once(S::zero())
                .chain(self.xi.kinks().iter().map(|&k| (k - shift) / s))
                .collect(),
            ..Default::default()
        };
        match gauss_expectation(&GaussIntegrand::Value(&g), &options)? {
            GaussOutcome::Finite { value, .. } => Ok((self.gen.beta() * tau).exp() * value + drift),
            other => Err(LabError::NotIntegrable(format!(
                "oracle expectation is {}",
                other.status()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport<S> {
    pub violations: usize,
    pub checked: usize,
    pub fraction: f64,
    /// `max (Y_A − Y_B)` over all samples and nodes.
    pub max_excess: S,
    pub pass: bool,
}

/// Violation fraction allowed by [`comparison_check`].
pub const COMPARISON_ALLOWANCE: f64 = 1e-3;

/// Counts `(m, i)` with `Y_A > Y_B + tol`, for solutions expected to satisfy
/// `Y_A ≤ Y_B`.
pub fn comparison_check<S: Scalar>(a: &BsdeSolution<S>, b: &BsdeSolution<S>, tol: S) -> Result<ComparisonReport<S>> {
    if !a.same_setup(b) {
        return Err(LabError::EnsembleMismatch(
            "compared solutions use different grids, paths or bases".into(),
        ));
    }
    let mut violations = 0usize;
    let mut max_excess = S::neg_infinity();
    for (ya, yb) in a.y.iter().zip(&b.y) {
        let (v, e) = ya
            .par_iter()
            .zip(yb)
            .map(|(&p, &q)| (usize::from(p > q + tol), p - q))
            .reduce(|| (0, S::neg_infinity()), |x, y| (x.0 + y.0, x.1.max(y.1)));
        violations += v;
        max_excess = max_excess.max(e);
    }
    let checked = a.samples() * (a.steps() + 1);
    let fraction = violations as f64 / checked as f64;
    Ok(ComparisonReport {
        violations,
        checked,
        fraction,
        max_excess,
        pass: fraction < COMPARISON_ALLOWANCE,
    })
}

/// `E[max_i |Y_{t_i}|^p]^{1/p}`.
pub fn sp_norm<S: Scalar>(sol: &BsdeSolution<S>, p: S) -> Result<S> {
    if !(p >= S::one()) {
        return invalid(format!("norm exponent must be at least 1, got {p}"));
    }
    let terms: Vec<S> = (0..sol.samples())
        .into_par_iter()
        .map(|m| {
            let sup = sol.y.iter().map(|node| node[m].abs()).fold(S::zero(), S::max);
            sup.powf(p)
        })
        .collect();
    Ok(crate::stats::mean_estimate(&terms)?.value.powf(S::one() / p))
}

/// `E[(Σ_i |Z_{t_i}|² Δ_i)^{p/2}]^{1/p}`.
pub fn mp_norm<S: Scalar>(sol: &BsdeSolution<S>, p: S) -> Result<S> {
    if !(p >= S::one()) {
        return invalid(format!("norm exponent must be at least 1, got {p}"));
    }
    let terms: Vec<S> = (0..sol.samples())
        .into_par_iter()
        .map(|m| quadratic_variation(sol, m).powf(p / S::lit(2.0)))
        .collect();
    Ok(crate::stats::mean_estimate(&terms)?.value.powf(S::one() / p))
}

fn quadratic_variation<S: Scalar>(sol: &BsdeSolution<S>, m: usize) -> S {
    (0..sol.steps())
        .map(|i| {
            let z = sol.z(m, i);
            z.iter().map(|&v| v * v).sum::<S>() * sol.grid.dt(i)
        })
        .sum()
}

/// Grid-level stand-ins for continuity of `Y` and square integrability of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityProxies<S> {
    /// Mean over samples of `max_i |Y_{t_{i+1}} − Y_{t_i}|`.
    pub mean_max_increment: S,
    pub max_increment: S,
    /// Mean over samples of `Σ_i |Z_{t_i}|² Δ_i`.
    pub mean_z_energy: S,
    pub max_z_energy: S,
}

pub fn regularity_proxies<S: Scalar>(sol: &BsdeSolution<S>) -> RegularityProxies<S> {
    let per_path: Vec<(S, S)> = (0..sol.samples())
        .into_par_iter()
        .map(|m| {
            let inc = sol
                .y
                .windows(2)
                .map(|w| (w[1][m] - w[0][m]).abs())
                .fold(S::zero(), S::max);
            (inc, quadratic_variation(sol, m))
        })
        .collect();
    let count = S::from_usize_lossy(per_path.len().max(1));
    let incs: Vec<S> = per_path.iter().map(|p| p.0).collect();
    let energies: Vec<S> = per_path.iter().map(|p| p.1).collect();
    RegularityProxies {
        mean_max_increment: crate::stats::blocked_sum(&incs) / count,
        max_increment: incs.iter().copied().fold(S::zero(), S::max),
        mean_z_energy: crate::stats::blocked_sum(&energies) / count,
        max_z_energy: energies.iter().copied().fold(S::zero(), S::max),
    }
}

/// Fraction of `(m, i)` with `Z_{t_i}[0] < −k · SE_i`, where `SE_i` is the
/// regression standard error of `Z` at node `i`.
pub fn negative_z_fraction<S: Scalar>(sol: &BsdeSolution<S>, k: S) -> f64 {
    let d = sol.dim;
    let mut count = 0usize;
    for (i, node) in sol.z.iter().enumerate() {
        let threshold = -k * sol.diagnostics[i].z_se;
        count += node.par_chunks(d).filter(|z| z[0] < threshold).count();
    }
    count as f64 / (sol.samples() * sol.steps()).max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Alpha;
    use crate::integrability::catalog;

    fn setup(n: usize, m: usize, seed: u64) -> PathEnsemble<f64> {
        PathEnsemble::sample(&TimeGrid::uniform(1.0, n).unwrap(), 1, m, seed).unwrap()
    }

    fn poly(k: usize) -> RegressionBasis {
        RegressionBasis::polynomial(k).unwrap()
    }

    #[test]
    fn martingale_representation_of_w() {
        let paths = setup(20, 50_000, 1);
        let sol = solve(&catalog::brownian_terminal(), &GeneratorSpec::zero(), &paths, &poly(3), &SolverOptions::default())
            .unwrap();
        assert!(sol.y0().within(0.0, 3.0), "{:?}", sol.y0());
        for i in 0..20 {
            let mean = sol.z_node(i).iter().sum::<f64>() / 50_000.0;
            let se = sol.diagnostics()[i].z_se.max(1e-3);
            assert!((mean - 1.0).abs() < 3.0 * se, "node {i}: mean Z {mean}");
        }
        assert_eq!(sol.y_node(20), catalog::brownian_terminal().evaluate(&paths).unwrap().as_slice());
    }

    #[test]
    fn constant_drift() {
        let paths = setup(10, 20_000, 2);
        let gen = GeneratorSpec::typical(Alpha::Constant(0.7), 0.0, 0.0).unwrap();
        let xi = catalog::clamp(-1.0, 1.0);
        let sol = solve(&xi, &gen, &paths, &poly(4), &SolverOptions::default()).unwrap();
        let mean = crate::stats::mean_estimate(&xi.evaluate(&paths).unwrap()).unwrap();
        assert!((sol.y0().value - (mean.value + 0.7)).abs() < 1e-9);
    }

    #[test]
    fn zero_generator_y0_is_sample_mean() {
        let paths = setup(8, 10_000, 3);
        let xi = catalog::exp_abs(0.5);
        let sol = solve(&xi, &GeneratorSpec::zero(), &paths, &poly(4), &SolverOptions::default()).unwrap();
        let mean = crate::stats::mean_estimate(&xi.evaluate(&paths).unwrap()).unwrap();
        assert!((sol.y0().value - mean.value).abs() < 1e-10);
        assert!((sol.y0().std_error - mean.std_error).abs() < 1e-6);
    }

    #[test]
    fn preconditions() {
        let paths = setup(2, 30, 4);
        let gen = GeneratorSpec::typical(Alpha::Zero, 3.0, 0.0).unwrap();
        let opts = SolverOptions::default();
        assert!(solve(&catalog::constant(1.0), &gen, &paths, &poly(1), &opts).is_err());
        assert!(solve(&catalog::constant(1.0), &GeneratorSpec::zero(), &paths, &poly(4), &opts).is_err());
        assert!(solve(&catalog::constant(1.0), &GeneratorSpec::zero(), &paths, &poly(2), &opts).is_ok());
    }

    #[test]
    fn picard_budget_exhaustion_is_reported() {
        let paths = setup(4, 1000, 5);
        let gen = GeneratorSpec::typical(Alpha::Zero, 0.9, 0.0).unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            tolerance: 1e-12,
        };
        let err = solve(&catalog::constant(1.0), &gen, &paths, &poly(1), &opts).unwrap_err();
        assert!(matches!(err, LabError::NonConvergence { node: 3, .. }));
    }

    #[test]
    fn linear_growth_in_y() {
        // f = β|y| with ξ ≡ 1: the implicit scheme gives (1 − βΔ)^{-N}.
        let paths = setup(10, 200, 6);
        let gen = GeneratorSpec::typical(Alpha::Zero, 0.5, 0.0).unwrap();
        let sol = solve(&catalog::constant(1.0), &gen, &paths, &poly(1), &SolverOptions::default()).unwrap();
        let expected = (1.0f64 - 0.05).powi(-10);
        assert!((sol.y0().value - expected).abs() < 1e-10);
    }

    #[test]
    fn oracle_examples() {
        let id = closed_form_oracle(&catalog::brownian_terminal::<f64>(), &GeneratorSpec::gamma_abs_z(0.5).unwrap(), 1.0).unwrap();
        assert!((id.value(0.0, 0.0).unwrap() - 0.5).abs() < 1e-10);
        let clamp = closed_form_oracle(&catalog::clamp(-2.0f64, 2.0), &GeneratorSpec::gamma_abs_z(0.5).unwrap(), 1.0).unwrap();
        assert!((clamp.value(0.0, 0.0).unwrap() - 0.47269734341652364).abs() < 1e-9);
        let gen = GeneratorSpec::typical(Alpha::Constant(1.0), 1.0, 0.5).unwrap();
        let c = closed_form_oracle(&catalog::constant(2.0), &gen, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((c.value(0.0, 0.3).unwrap() - (2.0 * e + e - 1.0)).abs() < 1e-10);
        let abs = TerminalValue::markovian_1d("|W|", |x: f64| x.abs());
        assert!(matches!(
            closed_form_oracle(&abs, &GeneratorSpec::gamma_abs_z(0.5).unwrap(), 1.0),
            Err(LabError::OracleInvalid(_))
        ));
    }

    #[test]
    fn comparison_examples() {
        let paths = setup(10, 20_000, 7);
        let opts = SolverOptions::default();
        let xi = catalog::clamp(-2.0, 2.0);
        let gen = GeneratorSpec::gamma_abs_z(0.5).unwrap();
        let a = solve(&xi, &gen, &paths, &poly(4), &opts).unwrap();
        let same = comparison_check(&a, &a, 0.0).unwrap();
        assert_eq!(same.violations, 0);

        // Linear f = β|y| on values bounded away from 0: the shift by 1 propagates as
        // (1 − βΔ)^{-(N−i)}, the implicit-step version of e^{β(T−t)}.
        let linear = GeneratorSpec::typical(Alpha::Zero, 0.5, 0.0).unwrap();
        let pos = catalog::clamp(1.0, 3.0);
        let a_lin = solve(&pos, &linear, &paths, &poly(4), &opts).unwrap();
        let shifted = pos.map("clamp + 1", |v| v + 1.0);
        let b = solve(&shifted, &linear, &paths, &poly(4), &opts).unwrap();
        for i in [0, 5, 10] {
            let growth = (1.0f64 - 0.05).powi(-(10 - i as i32));
            for m in [0, 100, 9999] {
                assert!((b.y(m, i) - a_lin.y(m, i) - growth).abs() < 1e-9);
            }
        }
        assert!(comparison_check(&a_lin, &b, 0.0).unwrap().pass);
        let zero = solve(&xi, &GeneratorSpec::zero(), &paths, &poly(4), &opts).unwrap();
        assert!(comparison_check(&zero, &a, 1e-9).unwrap().pass);

        let other = setup(10, 20_000, 8);
        let c = solve(&xi, &gen, &other, &poly(4), &opts).unwrap();
        assert!(comparison_check(&a, &c, 0.0).is_err());
    }

    #[test]
    fn norms_of_simple_processes() {
        let paths = setup(4, 10_000, 9);
        let opts = SolverOptions::default();
        let sol = solve(&catalog::constant(-2.0), &GeneratorSpec::zero(), &paths, &poly(1), &opts).unwrap();
        for p in [1.0, 2.0, 5.0] {
            assert!((sp_norm(&sol, p).unwrap() - 2.0).abs() < 1e-12);
        }
        // Z of a constant is regression noise of order 1/sqrt(M Δ).
        assert!(mp_norm(&sol, 2.0).unwrap() < 0.1);
        assert!(sp_norm(&sol, 0.5).is_err());

        let paths = setup(16, 40_000, 10);
        let w = solve(&catalog::brownian_terminal(), &GeneratorSpec::zero(), &paths, &poly(1), &opts).unwrap();
        assert!((mp_norm(&w, 2.0).unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn sign_of_z_for_monotone_terminal_value() {
        let paths = setup(20, 50_000, 11);
        let sol = solve(
            &catalog::clamp(-2.0, 2.0),
            &GeneratorSpec::gamma_abs_z(0.5).unwrap(),
            &paths,
            &poly(4),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(negative_z_fraction(&sol, 3.0) < 0.01);
    }
}
