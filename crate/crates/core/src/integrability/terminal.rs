use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::stochastic::{PathEnsemble, PathView};

type MarkovFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
type ScalarFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;
type PathFn<S> = Arc<dyn Fn(&PathView<'_, S>) -> S + Send + Sync>;

#[derive(Clone)]
pub enum TerminalKind<S> {
    /// A function of `W_T`.
    Markovian(MarkovFn<S>),
    /// A function of the whole sampled path.
    Path(PathFn<S>),
}

/// An `F_T`-measurable terminal value `ξ`.
#[derive(Clone)]
pub struct TerminalValue<S> {
    kind: TerminalKind<S>,
    dim: Option<usize>,
    ln_abs: Option<ScalarFn<S>>,
    kinks: Vec<S>,
    nonnegative: bool,
    description: String,
}

impl<S> fmt::Debug for TerminalValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalValue")
            .field("description", &self.description)
            .field("markovian", &matches!(self.kind, TerminalKind::Markovian(_)))
            .field("dim", &self.dim)
            .field("nonnegative", &self.nonnegative)
            .finish()
    }
}

impl<S: Scalar> TerminalValue<S> {
    pub fn markovian(description: impl Into<String>, f: impl Fn(&[S]) -> S + Send + Sync + 'static) -> Self {
        TerminalValue {
            kind: TerminalKind::Markovian(Arc::new(f)),
            dim: None,
            ln_abs: None,
            kinks: Vec::new(),
            nonnegative: false,
            description: description.into(),
        }
    }

    /// `ξ = g(W_T)` for one-dimensional Brownian motion.
    pub fn markovian_1d(description: impl Into<String>, g: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        TerminalValue {
            dim: Some(1),
            ..Self::markovian(description, move |w: &[S]| g(w[0]))
        }
    }

    pub fn path_dependent(
        description: impl Into<String>,
        f: impl Fn(&PathView<'_, S>) -> S + Send + Sync + 'static,
    ) -> Self {
        TerminalValue {
            kind: TerminalKind::Path(Arc::new(f)),
            dim: None,
            ln_abs: None,
            kinks: Vec::new(),
            nonnegative: false,
            description: description.into(),
        }
    }

    /// Supplies `ln|g(w)|` for one-dimensional Markovian values whose
    /// magnitude leaves the floating-point range.
    pub fn with_ln_abs(mut self, ln_abs: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        self.ln_abs = Some(Arc::new(ln_abs));
        self
    }

    /// Points of `W_T` where `g` is not smooth.
    pub fn with_kinks(mut self, kinks: Vec<S>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = true;
        self
    }

    pub fn kind(&self) -> &TerminalKind<S> {
        &self.kind
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn kinks(&self) -> &[S] {
        &self.kinks
    }

    pub fn is_markovian(&self) -> bool {
        matches!(self.kind, TerminalKind::Markovian(_))
    }

    pub fn is_markovian_1d(&self) -> bool {
        self.is_markovian() && self.dim == Some(1)
    }

    /// Dimension the value is tied to; `None` when it accepts any.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// `g(w)` for a Markovian value; `None` for path-dependent ones.
    pub fn at_terminal_point(&self, w: &[S]) -> Option<S> {
        match &self.kind {
            TerminalKind::Markovian(f) => Some(f(w)),
            TerminalKind::Path(_) => None,
        }
    }

    /// `g(x)` for a one-dimensional Markovian value.
    pub fn eval_1d(&self, x: S) -> S {
        match &self.kind {
            TerminalKind::Markovian(f) => f(&[x]),
            TerminalKind::Path(_) => panic!("eval_1d on a path-dependent terminal value"),
        }
    }

    /// `ln|g(x)|`, using the supplied log form when available.
    pub fn ln_abs_1d(&self, x: S) -> S {
        match &self.ln_abs {
            Some(l) => l(x),
            None => self.eval_1d(x).abs().ln(),
        }
    }

    pub fn eval_path(&self, path: &PathView<'_, S>) -> S {
        match &self.kind {
            TerminalKind::Markovian(f) => f(&path.position(path.grid().steps())),
            TerminalKind::Path(f) => f(path),
        }
    }

    /// `ξ` on every sample of the ensemble.
    pub fn evaluate(&self, paths: &PathEnsemble<S>) -> Result<Vec<S>> {
        if let Some(d) = self.dim {
            if d != paths.dim() {
                return invalid(format!(
                    "terminal value '{}' expects d = {d}, paths have d = {}",
                    self.description,
                    paths.dim()
                ));
            }
        }
        Ok(match &self.kind {
            TerminalKind::Markovian(f) => paths
                .terminal_positions()
                .par_chunks(paths.dim())
                .map(|w| f(w))
                .collect(),
            TerminalKind::Path(f) => (0..paths.samples())
                .into_par_iter()
                .map(|m| f(&paths.path(m)))
                .collect(),
        })
    }

    /// `h ∘ ξ` with the same measurability structure.
    pub fn map(&self, description: impl Into<String>, h: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        let h = Arc::new(h);
        let kind = match &self.kind {
            TerminalKind::Markovian(f) => {
                let f = f.clone();
                TerminalKind::Markovian(Arc::new(move |w: &[S]| h(f(w))) as MarkovFn<S>)
            }
            TerminalKind::Path(f) => {
                let f = f.clone();
                TerminalKind::Path(Arc::new(move |p: &PathView<'_, S>| h(f(p))) as PathFn<S>)
            }
        };
        TerminalValue {
            kind,
            dim: self.dim,
            ln_abs: None,
            kinks: self.kinks.clone(),
            nonnegative: false,
            description: description.into(),
        }
    }

    pub(crate) fn ln_abs_fn(&self) -> Option<ScalarFn<S>> {
        self.ln_abs.clone()
    }

    pub(crate) fn set_ln_abs(&mut self, f: Option<ScalarFn<S>>) {
        self.ln_abs = f;
    }

    pub(crate) fn set_nonnegative(&mut self, flag: bool) {
        self.nonnegative = flag;
    }
}

/// Terminal values used throughout the experiments.
pub mod catalog {
    use super::*;

    pub fn constant<S: Scalar>(c: S) -> TerminalValue<S> {
        let v = TerminalValue::markovian(format!("constant {c}"), move |_w: &[S]| c);
        if c >= S::zero() {
            v.nonnegative()
        } else {
            v
        }
    }

    /// `ξ = W_T` (first coordinate).
    pub fn brownian_terminal<S: Scalar>() -> TerminalValue<S> {
        TerminalValue::markovian_1d("W_T", |x| x)
    }

    /// `ξ = min(max(W_T, lo), hi)`.
    pub fn clamp<S: Scalar>(lo: S, hi: S) -> TerminalValue<S> {
        TerminalValue::markovian_1d(format!("clamp(W_T, {lo}, {hi})"), move |x: S| x.max(lo).min(hi))
            .with_kinks(vec![lo, hi])
    }

    /// `ξ = exp(k |W_T|)`.
    pub fn exp_abs<S: Scalar>(k: S) -> TerminalValue<S> {
        TerminalValue::markovian_1d(format!("exp({k} |W_T|)"), move |x: S| (k * x.abs()).exp())
            .with_ln_abs(move |x: S| k * x.abs())
            .with_kinks(vec![S::zero()])
            .nonnegative()
    }

    /// `ξ = exp(½W_T² − μ|W_T| + ½μ²) − 1 = expm1((|W_T| − μ)²/2)`.
    pub fn counterexample<S: Scalar>(mu: S) -> TerminalValue<S> {
        let half = S::lit(0.5);
        let exponent = move |x: S| {
            let u = x.abs() - mu;
            half * u * u
        };
        TerminalValue::markovian_1d(format!("counterexample mu={mu}"), move |x: S| exponent(x).exp_m1())
            .with_ln_abs(move |x: S| {
                let a = exponent(x);
                if a == S::zero() {
                    S::neg_infinity()
                } else if a > S::lit(30.0) {
                    a + (-(-a).exp()).ln_1p()
                } else {
                    a.exp_m1().ln()
                }
            })
            .with_kinks(vec![-mu, S::zero(), mu])
            .nonnegative()
    }

    /// `ξ = max_i W_{t_i}` (first coordinate), a path-dependent value.
    pub fn running_maximum<S: Scalar>() -> TerminalValue<S> {
        TerminalValue::path_dependent("max_t W_t", |p: &PathView<'_, S>| {
            p.first_coordinate()
                .into_iter()
                .fold(S::neg_infinity(), S::max)
        })
    }
}
