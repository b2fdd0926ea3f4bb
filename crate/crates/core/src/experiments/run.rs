use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{Cell, ResultTable};
use crate::dual::{apriori_bound, phi_moment_check, GeneratorSpec};
use crate::error::Result;
use crate::integrability::{
    integrability_report, young_relative_gap, EntryOutcome, Functional, GaussOptions, ReportRequest,
    TerminalValue,
};
use crate::ladder::{run_ladder, LadderOptions, LadderReport, TruncationSchedule, Verdict};
use crate::lsmc::{closed_form_oracle, mp_norm, solve, sp_norm, SolverOptions};
use crate::stochastic::{ControlProcess, PathEnsemble, TimeGrid};

/// Number of log-spaced `λ` buckets in the Young sweep.
const SWEEP_BUCKETS: usize = 10;

/// Validates `config`, runs experiment `kind` and returns its table. Failed
/// assertions are recorded in the table, not returned as errors.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate(kind)?;
    let start = Instant::now();
    let mut table = match kind {
        ExperimentKind::YoungSweep => young_sweep(config)?,
        ExperimentKind::PhiMoment => phi_moment(config)?,
        ExperimentKind::Integrability => integrability(config)?,
        ExperimentKind::Solve => solve_experiment(config)?,
        ExperimentKind::Ladder => ladder(config)?,
        ExperimentKind::Counterexample => counterexample(config)?,
        ExperimentKind::Bound => bound(config)?,
    };
    table.metadata.seed = config.seed;
    table.metadata.config = serde_json::to_value(config).expect("configuration serializes");
    table.metadata.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(table)
}

fn generator(config: &ExperimentConfig, kind: ExperimentKind) -> Result<GeneratorSpec<f64>> {
    GeneratorSpec::typical(config.alpha.build()?, config.beta, config.gamma_for(kind))
}

fn terminal(config: &ExperimentConfig, kind: ExperimentKind) -> Result<TerminalValue<f64>> {
    config.terminal_or_default(kind).build(config.mu)
}

fn ensemble(config: &ExperimentConfig, kind: ExperimentKind) -> Result<PathEnsemble<f64>> {
    let grid = TimeGrid::uniform(config.horizon, config.steps_for(kind))?;
    PathEnsemble::sample(&grid, config.dim, config.samples, config.seed)
}

fn gauss_options(config: &ExperimentConfig) -> GaussOptions<f64> {
    GaussOptions {
        radii: config.radii.clone(),
        rel_tol: config.quadrature_rel_tol,
        ..Default::default()
    }
}

fn young_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    let s = &config.sweep;
    let mut table = ResultTable::new(
        ExperimentKind::YoungSweep,
        &["lambda_lo", "lambda_hi", "triples", "min_relative_gap", "argmin_lambda", "argmin_x", "argmin_y"],
    );
    let (ln_lo, ln_hi) = (s.lambda_range[0].ln(), s.lambda_range[1].ln());
    let ln_ymax = s.y_max.max(1.0).ln();
    let width = (ln_hi - ln_lo) / SWEEP_BUCKETS as f64;
    let mut buckets: Vec<(usize, f64, [f64; 3])> = vec![(0, f64::INFINITY, [f64::NAN; 3]); SWEEP_BUCKETS];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for k in 0..s.triples {
        // λ log-uniform; y log-uniform over [e^{-20}, y_max] with exact zeros
        // and exact y_max mixed in.
        let ln_lambda = ln_lo + (ln_hi - ln_lo) * rng.random::<f64>();
        let lambda = ln_lambda.exp().clamp(s.lambda_range[0], s.lambda_range[1]);
        let x = s.x_range[0] + (s.x_range[1] - s.x_range[0]) * rng.random::<f64>();
        let u: f64 = rng.random();
        let y = match k % 1000 {
            0 => 0.0,
            1 => s.y_max,
            _ => (-20.0 + (ln_ymax + 20.0) * u).exp().min(s.y_max),
        };
        let gap = young_relative_gap(lambda, x, y)?;
        let b = if width > 0.0 {
            (((ln_lambda - ln_lo) / width) as usize).min(SWEEP_BUCKETS - 1)
        } else {
            0
        };
        let entry = &mut buckets[b];
        entry.0 += 1;
        if gap < entry.1 {
            entry.1 = gap;
            entry.2 = [lambda, x, y];
        }
    }
    let mut min_gap = f64::INFINITY;
    for (b, (count, gap, arg)) in buckets.iter().enumerate() {
        let lo = (ln_lo + width * b as f64).exp();
        let hi = (ln_lo + width * (b + 1) as f64).exp();
        let some = *count > 0;
        table.push(vec![
            lo.into(),
            hi.into(),
            (*count).into(),
            some.then_some(*gap).into(),
            some.then_some(arg[0]).into(),
            some.then_some(arg[1]).into(),
            some.then_some(arg[2]).into(),
        ]);
        min_gap = min_gap.min(*gap);
    }
    table.note("triples", s.triples);
    table.note("min_relative_gap", min_gap);
    table.assert(
        "young inequality",
        min_gap >= -s.tolerance,
        format!("min relative gap {min_gap:e} against -{:e}", s.tolerance),
    );
    Ok(table)
}

fn phi_moment(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::PhiMoment;
    let gamma = config.gamma_for(kind);
    let paths = ensemble(config, kind)?;
    let mut table = ResultTable::new(kind, &["control", "estimate", "std_error", "bound", "within_bound"]);
    let push = |table: &mut ResultTable, name: String, q: &ControlProcess<f64>| -> Result<_> {
        let c = phi_moment_check(config.lambda, q, &paths, 0)?;
        table.push(vec![name.into(), c.lhs.value.into(), c.lhs.std_error.into(), c.rhs.into(), c.pass.into()]);
        Ok(c)
    };
    let mut direction = vec![0.0; config.dim];
    direction[0] = gamma;
    let constant = push(&mut table, "constant gamma e_1".into(), &ControlProcess::constant(&paths, gamma, &direction)?)?;
    let mut all_below = constant.pass;
    for k in 0..config.controls {
        let seed = config.seed.wrapping_add(1 + k as u64);
        let q = ControlProcess::random_bang_bang(&paths, gamma, seed)?;
        all_below &= push(&mut table, format!("bang-bang #{k}"), &q)?.pass;
    }
    let product = config.lambda * gamma * gamma * config.horizon;
    table.note("lambda_gamma2_T", product);
    table.note("bound", constant.rhs);
    table.assert(
        "equality for the constant control",
        constant.lhs.within(constant.rhs, 3.0),
        format!("{} +- {} against {}", constant.lhs.value, constant.lhs.std_error, constant.rhs),
    );
    table.assert("every control below the bound", all_below, "estimate <= bound + 3 SE");
    Ok(table)
}

fn outcome_cells(outcome: &EntryOutcome<f64>) -> [Cell; 4] {
    match outcome {
        EntryOutcome::Finite { value, error } => ["FINITE".into(), (*value).into(), (*error).into(), Cell::Missing],
        EntryOutcome::Divergent(ev) => [
            "DIVERGENT".into(),
            Cell::Divergent {
                exponent: ev.growth_exponent,
            },
            Cell::Missing,
            ev.growth_exponent.into(),
        ],
        EntryOutcome::Inconclusive(ev) => ["INCONCLUSIVE".into(), Cell::Missing, Cell::Missing, ev.growth_exponent.into()],
    }
}

fn integrability(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::Integrability;
    let xi = terminal(config, kind)?;
    let request = ReportRequest {
        lambdas: vec![config.lambda],
        moments: config.moments.clone(),
        gamma: config.gamma_for(kind),
        horizon: config.horizon,
    };
    let paths = if xi.is_markovian_1d() { None } else { Some(ensemble(config, kind)?) };
    let report = integrability_report(&xi, &request, paths.as_ref(), &gauss_options(config))?;
    let mut table = ResultTable::new(
        kind,
        &["functional", "method", "status", "value", "error", "growth_exponent", "unstable"],
    );
    for e in &report.entries {
        let [status, value, error, growth] = outcome_cells(&e.outcome);
        let method = match e.method {
            crate::integrability::Method::MonteCarlo => "monte-carlo",
            crate::integrability::Method::Quadrature => "quadrature",
        };
        table.push(vec![e.name.clone().into(), method.into(), status, value, error, growth, e.unstable.into()]);
    }
    table.note("terminal", report.description.clone());
    Ok(table)
}

fn solve_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::Solve;
    let xi = terminal(config, kind)?;
    let gen = generator(config, kind)?;
    let paths = ensemble(config, kind)?;
    let basis = config.basis.build()?;
    let sol = solve(&xi, &gen, &paths, &basis, &SolverOptions::default())?;
    let mut table = ResultTable::new(
        kind,
        &["node", "t", "mean_y", "value_se", "mean_z1", "iterations", "smallest_singular", "ridge"],
    );
    let grid = sol.grid();
    let m = sol.samples();
    for d in sol.diagnostics() {
        let i = d.node;
        let mean_y = sol.y_node(i).iter().sum::<f64>() / m as f64;
        let z = sol.z_node(i);
        let mean_z = (0..m).map(|k| z[k * sol.dim()]).sum::<f64>() / m as f64;
        table.push(vec![
            i.into(),
            grid.time(i).into(),
            mean_y.into(),
            d.value_se.into(),
            mean_z.into(),
            d.iterations.into(),
            d.fit.smallest_singular.into(),
            d.fit.ridge.into(),
        ]);
    }
    let y0 = sol.y0();
    table.note("terminal", xi.description());
    table.note("basis", basis.describe());
    table.note("y0", y0.value);
    table.note("y0_se", y0.std_error);
    table.note("s2_norm", sp_norm(&sol, 2.0)?);
    table.note("m2_norm", mp_norm(&sol, 2.0)?);
    match closed_form_oracle(&xi, &gen, config.horizon) {
        Ok(oracle) => {
            let exact = oracle.value(0.0, 0.0)?;
            let rel = (y0.value - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
            table.note("oracle", exact);
            table.note("relative_error", rel);
            table.assert(
                "oracle agreement",
                rel <= config.oracle_rel_tol,
                format!("relative error {rel:e} against {}", config.oracle_rel_tol),
            );
        }
        Err(e) => table.note("oracle", format!("not applicable: {e}")),
    }
    Ok(table)
}

fn ladder_options(config: &ExperimentConfig, kind: ExperimentKind) -> LadderOptions<f64> {
    let gamma = config.gamma_for(kind);
    let sufficient = config.lambda * gamma * gamma * config.horizon < 1.0;
    LadderOptions {
        lambda: sufficient.then_some(config.lambda),
        hitting_levels: config.ladder.hitting_levels.clone(),
        solver: SolverOptions::default(),
        min_binding: config.ladder.min_binding,
        growth_window: config.ladder.growth_window,
    }
}

fn run_ladder_for(config: &ExperimentConfig, kind: ExperimentKind, xi: &TerminalValue<f64>) -> Result<LadderReport<f64>> {
    let gen = generator(config, kind)?;
    let paths = ensemble(config, kind)?;
    let schedule = TruncationSchedule::dyadic(config.ladder.j_from, config.ladder.j_to)?;
    let basis = config.ladder.basis.build()?;
    run_ladder(xi, &gen, &schedule, &paths, &basis, &ladder_options(config, kind))
}

fn ladder(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::Ladder;
    let xi = terminal(config, kind)?;
    let report = run_ladder_for(config, kind, &xi)?;
    let mut table = ResultTable::new(
        kind,
        &["n", "p", "y0", "y0_se", "increment", "increment_se", "binding", "error"],
    );
    for r in &report.rungs {
        table.push(vec![
            r.n.into(),
            r.p.into(),
            r.y0.map(|e| e.value).into(),
            r.y0.map(|e| e.std_error).into(),
            r.increment.map(|e| e.value).into(),
            r.increment.map(|e| e.std_error).into(),
            r.binding.into(),
            r.error.clone().into(),
        ]);
    }
    table.note("terminal", xi.description());
    table.note("verdict", report.verdict.as_str());
    table.note("exhausted", report.exhausted);
    table.note("monotone_n_fraction", report.monotone_n.fraction);
    table.note("monotone_p_fraction", report.monotone_p.fraction);
    table.note("monotone_p_checked", report.monotone_p.checked);
    if let Some(b) = &report.bound {
        table.note("bound_violation_fraction", b.fraction);
        table.note("bound_max_excess", b.max_excess);
    }
    for h in &report.hitting {
        let counts: Vec<String> = h.counts.iter().map(|c| c.to_string()).collect();
        table.note(&format!("hitting_{}_{}", h.process, h.level), counts.join(" "));
    }
    table.assert(
        "monotone in n",
        report.monotone_n.pass,
        format!("violation fraction {}", report.monotone_n.fraction),
    );
    table.assert(
        "monotone in p",
        report.monotone_p.pass,
        format!("violation fraction {}", report.monotone_p.fraction),
    );
    if let Some(b) = &report.bound {
        table.assert("dominated by the bound", b.pass, format!("violation fraction {}", b.fraction));
    }
    Ok(table)
}

/// `E[ξ]` for `ξ = expm1((|W_1| − μ)²/2)`.
pub fn counterexample_mean(mu: f64) -> f64 {
    2.0 * (0.5 * mu * mu).exp() / (mu * (2.0 * std::f64::consts::PI).sqrt()) - 1.0
}

fn counterexample(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::Counterexample;
    let mu = config.mu;
    let gamma = config.gamma_for(kind);
    let xi = terminal(config, kind)?;
    let request = ReportRequest {
        lambdas: vec![config.lambda],
        moments: vec![1.0],
        gamma,
        horizon: config.horizon,
    };
    let report = integrability_report(&xi, &request, None, &gauss_options(config))?;
    let find = |f: Functional<f64>| report.find(&f).map(|e| e.outcome.clone());
    let mean = find(Functional::Moment { p: 1.0 });
    let psi = find(Functional::Psi { lambda: config.lambda });
    let exp_abs = find(Functional::ExpAbs { gamma });

    let mut table = ResultTable::new(
        kind,
        &["quantity", "status", "value", "error", "growth_exponent", "reference"],
    );
    // The closed forms below hold on the unit horizon only.
    let unit = config.horizon == 1.0;
    let reference = unit.then(|| counterexample_mean(mu));
    let mut push = |name: &str, outcome: &Option<EntryOutcome<f64>>, reference: Option<f64>| {
        if let Some(o) = outcome {
            let [status, value, error, growth] = outcome_cells(o);
            table.push(vec![name.into(), status, value, error, growth, reference.into()]);
        }
    };
    push("E[xi]", &mean, reference);
    push(&format!("E[psi_{}(xi)]", config.lambda), &psi, None);
    push(&format!("E[xi exp({gamma}|W_T|)]"), &exp_abs, unit.then_some(gamma - mu));

    let ladder = run_ladder_for(config, kind, &xi)?;
    table.push(vec![
        "ladder verdict".into(),
        ladder.verdict.as_str().into(),
        ladder.rungs.last().and_then(|r| r.y0).map(|e| e.value).into(),
        ladder.rungs.last().and_then(|r| r.y0).map(|e| e.std_error).into(),
        Cell::Missing,
        Cell::Missing,
    ]);
    table.note("mu", mu);
    table.note("lambda", config.lambda);
    table.note("gamma", gamma);

    if unit {
        let exact = counterexample_mean(mu);
        let value = mean.as_ref().and_then(EntryOutcome::value);
        let rel = value.map(|v| (v - exact).abs() / exact);
        table.assert(
            "mean against closed form",
            rel.is_some_and(|r| r <= 1e-6),
            format!("relative error {rel:?}"),
        );
        // Integrand of E[ξ e^{γ|W|}] grows like e^{(γ−μ)|w|}.
        if gamma > mu {
            let exponent = match &exp_abs {
                Some(EntryOutcome::Divergent(ev)) => Some(ev.growth_exponent),
                _ => None,
            };
            table.assert(
                "exponential moment diverges",
                exponent.is_some_and(|e| (e - (gamma - mu)).abs() <= 0.05),
                format!("growth exponent {exponent:?} against {}", gamma - mu),
            );
            table.assert(
                "ladder diverges",
                ladder.verdict == Verdict::Diverging,
                format!("verdict {}", ladder.verdict.as_str()),
            );
        }
        // Ψ_λ(ξ) grows like e^{(1/√λ − μ)|w|}.
        let threshold = 1.0 / config.lambda.sqrt();
        if mu != threshold {
            let finite = psi.as_ref().is_some_and(EntryOutcome::is_finite);
            table.assert(
                "psi integrability",
                finite == (mu > threshold),
                format!("finite = {finite}, expected {}", mu > threshold),
            );
        }
    }
    Ok(table)
}

fn bound(config: &ExperimentConfig) -> Result<ResultTable> {
    let kind = ExperimentKind::Bound;
    let xi = terminal(config, kind)?;
    let gen = generator(config, kind)?;
    let paths = ensemble(config, kind)?;
    let basis = config.basis.build()?;
    let sol = solve(&xi, &gen, &paths, &basis, &SolverOptions::default())?;
    let bar = apriori_bound(&xi, &gen, config.lambda, &paths)?;
    let m = sol.samples();
    let mut table = ResultTable::new(
        kind,
        &["node", "t", "mean_y", "mean_bound", "max_excess", "violations"],
    );
    let mut violated = vec![false; m];
    let mut max_excess = f64::NEG_INFINITY;
    for d in sol.diagnostics() {
        let i = d.node;
        let tol = 3.0 * d.value_se;
        let (y, b) = (sol.y_node(i), bar.node(i));
        let mut count = 0usize;
        let mut node_excess = f64::NEG_INFINITY;
        for k in 0..m {
            let excess = y[k] - b[k];
            node_excess = node_excess.max(excess);
            if excess > tol {
                count += 1;
                violated[k] = true;
            }
        }
        max_excess = max_excess.max(node_excess);
        table.push(vec![
            i.into(),
            sol.grid().time(i).into(),
            (y.iter().sum::<f64>() / m as f64).into(),
            (b.iter().sum::<f64>() / m as f64).into(),
            node_excess.into(),
            count.into(),
        ]);
    }
    let fraction = violated.iter().filter(|&&v| v).count() as f64 / m as f64;
    table.note("terminal", xi.description());
    table.note("lambda_gamma2_T", config.lambda * gen.gamma() * gen.gamma() * config.horizon);
    table.note("y0", sol.y0().value);
    table.note("bound0", bar.at(0, 0));
    table.note("max_excess", max_excess);
    table.note("violation_fraction", fraction);
    table.assert(
        "solution below the bound",
        fraction < 1e-3,
        format!("{fraction} of samples exceed the bound by more than 3 SE"),
    );
    Ok(table)
}
