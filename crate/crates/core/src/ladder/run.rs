use rayon::prelude::*;
use serde::Serialize;

use super::schedule::{truncate_value, TruncationSchedule};
use crate::dual::{apriori_bound, check_sufficiency, conditional_psi_expectation, BoundProcess, GeneratorSpec};
use crate::error::{invalid, Result};
use crate::integrability::TerminalValue;
use crate::lsmc::{solve_from_terminal, BsdeSolution, RegressionBasis, SolverOptions};
use crate::scalar::Scalar;
use crate::stats::{mean_estimate, Estimate};
use crate::stochastic::PathEnsemble;

/// Allowed fraction of violations in the monotonicity and bound checks.
pub const LADDER_ALLOWANCE: f64 = 1e-3;
/// Cauchy threshold floor for CONVERGING.
pub const CAUCHY_FLOOR: f64 = 1e-3;
/// Increments must exceed this many standard errors to count as growth.
pub const GROWTH_SE: f64 = 5.0;
/// Range scanned when deciding whether `ξ` is bounded by the top rung.
const BOUNDED_SCAN: (f64, f64, usize) = (-40.0, 40.0, 80_001);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converging => "CONVERGING",
            Verdict::Diverging => "DIVERGING",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderOptions<S> {
    /// `λ` of the dominating process; the bound is checked when `λγ²T < 1`
    /// and `E[Ψ_λ(|ξ|)]` is finite.
    pub lambda: Option<S>,
    /// Levels `k` for the hitting-time histograms.
    pub hitting_levels: Vec<S>,
    pub solver: SolverOptions,
    /// A rung transition is informative when it changes `ξ` on at least this
    /// many samples.
    pub min_binding: usize,
    /// Number of trailing informative increments that must all show growth
    /// for DIVERGING.
    pub growth_window: usize,
}

impl<S: Scalar> Default for LadderOptions<S> {
    fn default() -> Self {
        LadderOptions {
            lambda: None,
            hitting_levels: Vec::new(),
            solver: SolverOptions::default(),
            min_binding: 10,
            growth_window: 3,
        }
    }
}

/// One schedule rung.
#[derive(Debug, Clone, Serialize)]
pub struct RungResult<S> {
    pub n: S,
    pub p: S,
    pub y0: Option<Estimate<S>>,
    /// `Y_0` minus that of the previous rung, with the standard error of the
    /// pathwise difference (common random numbers).
    pub increment: Option<Estimate<S>>,
    /// Samples whose terminal value changed since the previous rung.
    pub binding: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckStats<S> {
    pub violations: usize,
    pub checked: usize,
    pub fraction: f64,
    pub max_excess: S,
    pub pass: bool,
}

impl<S: Scalar> CheckStats<S> {
    fn empty() -> Self {
        CheckStats {
            violations: 0,
            checked: 0,
            fraction: 0.0,
            max_excess: S::neg_infinity(),
            pass: true,
        }
    }

    fn add(&mut self, violations: usize, checked: usize, max_excess: S) {
        self.violations += violations;
        self.checked += checked;
        self.max_excess = self.max_excess.max(max_excess);
        self.fraction = if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        };
        self.pass = self.fraction < LADDER_ALLOWANCE;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HittingHistogram<S> {
    pub level: S,
    /// `"bound"` for the dominating process, `"solution"` for `|Y|` on the top rung.
    pub process: &'static str,
    /// `counts[i]` paths first exceed the level at node `i`; `counts[N]`
    /// includes the paths that never do.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport<S> {
    pub rungs: Vec<RungResult<S>>,
    /// `Y^{n', p} ≥ Y^{n, p} − tol` over `(m, i)`.
    pub monotone_n: CheckStats<S>,
    /// `Y^{n, p'} ≤ Y^{n, p} + tol` over `(m, i)`.
    pub monotone_p: CheckStats<S>,
    /// Samples with `Y^{n,p}_{t_i} > Y̅_{t_i} + tol` at some node, per rung.
    pub bound: Option<CheckStats<S>>,
    /// `ξ` lies within the top rung's levels everywhere (not only on the samples).
    pub exhausted: bool,
    pub verdict: Verdict,
    pub hitting: Vec<HittingHistogram<S>>,
}

/// First node at which each path's value exceeds `level`, or `N` when it
/// never does. `nodes[i]` holds the values at node `i` over samples.
pub fn hitting_times<S: Scalar>(nodes: &[&[S]], level: S) -> Result<Vec<usize>> {
    if !(level > S::zero()) {
        return invalid(format!("hitting level must be positive, got {level}"));
    }
    let Some(first) = nodes.first() else {
        return Ok(Vec::new());
    };
    let last = nodes.len() - 1;
    Ok((0..first.len())
        .into_par_iter()
        .map(|m| nodes.iter().position(|v| v[m] > level).unwrap_or(last))
        .collect())
}

/// Counts of hitting indices over `0..=steps`.
pub fn histogram(indices: &[usize], steps: usize) -> Vec<usize> {
    let mut counts = vec![0usize; steps + 1];
    for &i in indices {
        counts[i.min(steps)] += 1;
    }
    counts
}

/// Verdict from the schedule rungs.
///
/// Only informative transitions (at least `min_binding` samples changed)
/// can show growth: once the levels exceed every sampled value the rungs
/// coincide whether or not `ξ` is bounded.
///
/// - DIVERGING: the last `window` informative increments all exceed
///   `GROWTH_SE` standard errors, unless `ξ` is known to be bounded by the top rung.
/// - CONVERGING: otherwise, when the last two increments are below
///   `max(CAUCHY_FLOOR, 3 SE)`.
/// - INCONCLUSIVE otherwise, including when a rung failed.
pub fn ladder_verdict<S: Scalar>(rungs: &[RungResult<S>], min_binding: usize, window: usize, exhausted: bool) -> Verdict {
    let increments: Vec<Option<(Estimate<S>, usize)>> = rungs
        .iter()
        .skip(1)
        .map(|r| r.increment.map(|e| (e, r.binding)))
        .collect();
    if increments.len() < 2 || increments.iter().any(|e| e.is_none()) {
        return Verdict::Inconclusive;
    }
    let increments: Vec<(Estimate<S>, usize)> = increments.into_iter().flatten().collect();
    let growth = |e: &Estimate<S>| e.value > S::lit(GROWTH_SE) * e.std_error && e.value > S::zero();
    let informative: Vec<&Estimate<S>> = increments
        .iter()
        .filter(|(_, b)| *b >= min_binding.max(1))
        .map(|(e, _)| e)
        .collect();
    if !exhausted && window > 0 && informative.len() >= window && informative[informative.len() - window..].iter().all(|e| growth(e)) {
        return Verdict::Diverging;
    }
    let cauchy = increments[increments.len() - 2..].iter().all(|(e, _)| {
        e.value.abs() < S::lit(CAUCHY_FLOOR).max(S::lit(3.0) * e.std_error)
    });
    if cauchy {
        Verdict::Converging
    } else {
        Verdict::Inconclusive
    }
}

/// Whether `|ξ| ≤ max(n, p)` on the whole line, by scanning `ln|g|` for a
/// one-dimensional Markovian value.
fn bounded_by<S: Scalar>(xi: &TerminalValue<S>, n: S, p: S) -> bool {
    if !xi.is_markovian_1d() {
        return false;
    }
    let (lo, hi, count) = BOUNDED_SCAN;
    let step = (hi - lo) / (count - 1) as f64;
    let (ln_n, ln_p) = (n.ln(), p.ln());
    (0..count).into_par_iter().all(|j| {
        let x = S::lit(lo + step * j as f64);
        let l = xi.ln_abs_1d(x);
        if !(l > S::neg_infinity()) {
            return true;
        }
        if xi.is_nonnegative() || xi.eval_1d(x) >= S::zero() {
            l <= ln_n
        } else {
            l <= ln_p
        }
    })
}

fn compare_nodes<S: Scalar>(
    lower: &BsdeSolution<S>,
    upper: &BsdeSolution<S>,
    stats: &mut CheckStats<S>,
) {
    for i in 0..=lower.steps() {
        let tol = if i < lower.steps() {
            S::lit(3.0) * lower.diagnostics()[i].value_se.max(upper.diagnostics()[i].value_se)
        } else {
            S::zero()
        };
        let (v, e) = lower
            .y_node(i)
            .par_iter()
            .zip(upper.y_node(i))
            .map(|(&a, &b)| (usize::from(a > b + tol), a - b))
            .reduce(|| (0, S::neg_infinity()), |x, y| (x.0 + y.0, x.1.max(y.1)));
        stats.add(v, lower.samples(), e);
    }
}

fn bound_check<S: Scalar>(sol: &BsdeSolution<S>, bound: &BoundProcess<S>) -> (usize, S) {
    let steps = sol.steps();
    let tols: Vec<S> = (0..=steps)
        .map(|i| {
            if i < steps {
                S::lit(3.0) * sol.diagnostics()[i].value_se
            } else {
                S::zero()
            }
        })
        .collect();
    (0..sol.samples())
        .into_par_iter()
        .map(|m| {
            let mut worst = S::neg_infinity();
            let mut hit = false;
            for (i, &tol) in tols.iter().enumerate() {
                let excess = sol.y(m, i) - bound.at(m, i);
                worst = worst.max(excess);
                hit |= excess > tol;
            }
            (usize::from(hit), worst)
        })
        .reduce(|| (0, S::neg_infinity()), |x, y| (x.0 + y.0, x.1.max(y.1)))
}

/// Solves the equation for every rung of `schedule` on the shared ensemble.
///
/// When both levels change between rungs, the intermediate rung
/// `(n_{j+1}, p_j)` is solved too so that monotonicity in `n` and in `p`
/// are checked separately. Rungs whose truncated terminal values coincide
/// reuse the previous solution.
pub fn run_ladder<S: Scalar>(
    xi: &TerminalValue<S>,
    gen: &GeneratorSpec<S>,
    schedule: &TruncationSchedule<S>,
    paths: &PathEnsemble<S>,
    basis: &RegressionBasis,
    options: &LadderOptions<S>,
) -> Result<LadderReport<S>> {
    let raw = xi.evaluate(paths)?;
    let horizon = paths.grid().horizon();
    let steps = paths.steps();

    let bound = match options.lambda {
        Some(lambda) if check_sufficiency(lambda, gen.gamma(), horizon).is_ok() => {
            let integrable = if xi.is_markovian_1d() {
                conditional_psi_expectation(xi, lambda, horizon, S::zero()).is_ok()
            } else {
                true
            };
            if integrable {
                apriori_bound(xi, gen, lambda, paths).ok()
            } else {
                None
            }
        }
        _ => None,
    };

    let truncated = |n: S, p: S| -> Vec<S> { raw.par_iter().map(|&x| truncate_value(x, n, p)).collect() };
    let solve_rung = |values: Vec<S>| solve_from_terminal(values, gen, paths, basis, &options.solver);

    let mut rungs: Vec<RungResult<S>> = Vec::with_capacity(schedule.len());
    let mut monotone_n = CheckStats::empty();
    let mut monotone_p = CheckStats::empty();
    let mut bound_stats = bound.as_ref().map(|_| CheckStats::empty());
    let mut previous: Option<(Vec<S>, BsdeSolution<S>)> = None;
    let mut previous_levels: Option<(S, S)> = None;

    for &(n, p) in schedule.rungs() {
        let values = truncated(n, p);
        let binding = match &previous {
            Some((prev_values, _)) => prev_values.iter().zip(&values).filter(|(a, b)| a != b).count(),
            None => 0,
        };
        let current = match (&previous, previous_levels) {
            (Some((_, prev_sol)), _) if binding == 0 => Ok(prev_sol.clone()),
            (Some((prev_values, prev_sol)), Some((pn, pp))) if n > pn && p > pp => {
                // Raise n first, then p.
                let mid_values = truncated(n, pp);
                let mid = if &mid_values == prev_values {
                    Ok(prev_sol.clone())
                } else {
                    solve_rung(mid_values.clone())
                };
                match mid {
                    Ok(mid) => {
                        compare_nodes(prev_sol, &mid, &mut monotone_n);
                        let top = if mid_values == values {
                            Ok(mid.clone())
                        } else {
                            solve_rung(values.clone())
                        };
                        if let Ok(top) = &top {
                            compare_nodes(top, &mid, &mut monotone_p);
                        }
                        top
                    }
                    Err(e) => Err(e),
                }
            }
            (Some((_, prev_sol)), Some((pn, _))) => {
                let sol = solve_rung(values.clone());
                if let Ok(sol) = &sol {
                    if n > pn {
                        compare_nodes(prev_sol, sol, &mut monotone_n);
                    } else {
                        compare_nodes(sol, prev_sol, &mut monotone_p);
                    }
                }
                sol
            }
            _ => solve_rung(values.clone()),
        };
        match current {
            Ok(sol) => {
                let increment = match &previous {
                    Some((_, prev_sol)) => {
                        let diff: Vec<S> = sol
                            .pathwise()
                            .par_iter()
                            .zip(prev_sol.pathwise())
                            .map(|(&a, &b)| a - b)
                            .collect();
                        let se = mean_estimate(&diff)?.std_error;
                        Some(Estimate {
                            value: sol.y0().value - prev_sol.y0().value,
                            std_error: se,
                        })
                    }
                    None => None,
                };
                if let (Some(b), Some(stats)) = (&bound, bound_stats.as_mut()) {
                    let (violations, worst) = bound_check(&sol, b);
                    stats.add(violations, sol.samples(), worst);
                }
                rungs.push(RungResult {
                    n,
                    p,
                    y0: Some(sol.y0()),
                    increment,
                    binding,
                    error: None,
                });
                previous = Some((values, sol));
            }
            Err(e) => {
                rungs.push(RungResult {
                    n,
                    p,
                    y0: None,
                    increment: None,
                    binding,
                    error: Some(e.to_string()),
                });
                previous = None;
            }
        }
        previous_levels = Some((n, p));
    }

    let (top_n, top_p) = schedule.top();
    let exhausted = bounded_by(xi, top_n, top_p);
    let verdict = ladder_verdict(&rungs, options.min_binding, options.growth_window, exhausted);

    let mut hitting = Vec::with_capacity(options.hitting_levels.len());
    for &level in &options.hitting_levels {
        if let Some(b) = &bound {
            let nodes: Vec<&[S]> = (0..=steps).map(|i| b.node(i)).collect();
            hitting.push(HittingHistogram {
                level,
                process: "bound",
                counts: histogram(&hitting_times(&nodes, level)?, steps),
            });
        } else if let Some((_, sol)) = &previous {
            let abs: Vec<Vec<S>> = (0..=steps)
                .map(|i| sol.y_node(i).iter().map(|v| v.abs()).collect())
                .collect();
            let nodes: Vec<&[S]> = abs.iter().map(|v| v.as_slice()).collect();
            hitting.push(HittingHistogram {
                level,
                process: "solution",
                counts: histogram(&hitting_times(&nodes, level)?, steps),
            });
        }
    }

    Ok(LadderReport {
        rungs,
        monotone_n,
        monotone_p,
        bound: bound_stats,
        exhausted,
        verdict,
        hitting,
    })
}
