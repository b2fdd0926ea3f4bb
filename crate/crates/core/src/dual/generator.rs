use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::integrability::integrate;
use crate::scalar::{norm, Scalar};

type TimeFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;
type DriverFn<S> = Arc<dyn Fn(S, S, &[S]) -> S + Send + Sync>;

/// The `α_t` term of the linear-growth bound.
#[derive(Clone)]
pub enum Alpha<S> {
    Zero,
    Constant(S),
    /// `values[j]` on `[breaks[j-1], breaks[j])`, with `breaks[-1] = -∞` and
    /// `breaks[len] = +∞`; `values.len() == breaks.len() + 1`.
    PiecewiseConstant { breaks: Vec<S>, values: Vec<S> },
    Function(TimeFn<S>),
}

impl<S: fmt::Debug> fmt::Debug for Alpha<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Zero => write!(f, "Zero"),
            Alpha::Constant(c) => write!(f, "Constant({c:?})"),
            Alpha::PiecewiseConstant { breaks, values } => f
                .debug_struct("PiecewiseConstant")
                .field("breaks", breaks)
                .field("values", values)
                .finish(),
            Alpha::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Serializable description of `α` for configuration files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaConfig {
    #[default]
    Zero,
    Constant { value: f64 },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
}

impl AlphaConfig {
    pub fn build<S: Scalar>(&self) -> Result<Alpha<S>> {
        match self {
            AlphaConfig::Zero => Ok(Alpha::Zero),
            AlphaConfig::Constant { value } => Alpha::constant(S::lit(*value)),
            AlphaConfig::PiecewiseConstant { breaks, values } => Alpha::piecewise(
                breaks.iter().map(|&b| S::lit(b)).collect(),
                values.iter().map(|&v| S::lit(v)).collect(),
            ),
        }
    }
}

impl<S: Scalar> Alpha<S> {
    pub fn constant(c: S) -> Result<Self> {
        if !c.is_finite() {
            return invalid(format!("alpha must be finite, got {c}"));
        }
        Ok(Alpha::Constant(c))
    }

    pub fn piecewise(breaks: Vec<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return invalid("piecewise alpha needs one more value than breaks");
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().chain(&values).any(|v| !v.is_finite()) {
            return invalid("piecewise alpha breaks must be finite and strictly increasing");
        }
        Ok(Alpha::PiecewiseConstant { breaks, values })
    }

    pub fn function(f: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        Alpha::Function(Arc::new(f))
    }

    pub fn at(&self, t: S) -> S {
        match self {
            Alpha::Zero => S::zero(),
            Alpha::Constant(c) => *c,
            Alpha::PiecewiseConstant { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
            Alpha::Function(f) => f(t),
        }
    }

    /// `∫_t^T e^{β(s−t)} α_s ds`.
    pub fn discounted_integral(&self, beta: S, t: S, horizon: S) -> Result<S> {
        if !(horizon >= t) {
            return invalid(format!("integration range [{t}, {horizon}] is reversed"));
        }
        // ∫_a^b e^{β(s−t)} ds
        let kernel = |a: S, b: S| {
            if beta == S::zero() {
                b - a
            } else {
                ((beta * (b - t)).exp() - (beta * (a - t)).exp()) / beta
            }
        };
        match self {
            Alpha::Zero => Ok(S::zero()),
            Alpha::Constant(c) => Ok(*c * kernel(t, horizon)),
            Alpha::PiecewiseConstant { breaks, values } => {
                let mut total = S::zero();
                let mut left = t;
                for (j, &v) in values.iter().enumerate() {
                    let right = breaks.get(j).copied().unwrap_or(horizon).min(horizon);
                    if right > left {
                        total = total + v * kernel(left, right);
                        left = right;
                    }
                }
                Ok(total)
            }
            Alpha::Function(f) => {
                let g = |s: S| (beta * (s - t)).exp() * f(s);
                let r = integrate(&g, t, horizon, &[], S::zero(), S::lit(1e-10), 2000)?;
                if !r.converged {
                    return Err(LabError::NotIntegrable(format!(
                        "alpha integral on [{t}, {horizon}] did not reach relative tolerance 1e-10"
                    )));
                }
                Ok(r.value)
            }
        }
    }
}

/// Generator `f(t, y, z)` with linear-growth constants: either the typical
/// `α_t + β|y| + γ|z|`, or a custom driver certified by
/// `|f(t, y, z)| ≤ α_t + β|y| + γ|z|`.
#[derive(Clone)]
pub struct GeneratorSpec<S> {
    alpha: Alpha<S>,
    beta: S,
    gamma: S,
    custom: Option<DriverFn<S>>,
    description: String,
}

impl<S: Scalar> fmt::Debug for GeneratorSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("custom", &self.custom.is_some())
            .field("description", &self.description)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck<S> {
    pub checked: usize,
    /// `max (|f| − α_t − β|y| − γ|z|)` over the sampled points.
    pub max_excess: S,
    pub holds: bool,
}

impl<S: Scalar> GeneratorSpec<S> {
    /// `f(t, y, z) = α_t + β|y| + γ|z|`.
    ///
    /// `γ = 0` is accepted so that pure-drift generators can be expressed.
    pub fn typical(alpha: Alpha<S>, beta: S, gamma: S) -> Result<Self> {
        if !(beta >= S::zero()) || !beta.is_finite() {
            return invalid(format!("beta must be finite and nonnegative, got {beta}"));
        }
        if !(gamma >= S::zero()) || !gamma.is_finite() {
            return invalid(format!("gamma must be finite and nonnegative, got {gamma}"));
        }
        let description = format!("{alpha:?} + {beta}|y| + {gamma}|z|");
        Ok(GeneratorSpec {
            alpha,
            beta,
            gamma,
            custom: None,
            description,
        })
    }

    /// `f ≡ 0`.
    pub fn zero() -> Self {
        GeneratorSpec {
            alpha: Alpha::Zero,
            beta: S::zero(),
            gamma: S::zero(),
            custom: None,
            description: "0".into(),
        }
    }

    /// `f(t, y, z) = γ|z|`.
    pub fn gamma_abs_z(gamma: S) -> Result<Self> {
        Self::typical(Alpha::Zero, S::zero(), gamma)
    }

    /// Replaces the driver by `f`, keeping `(α, β, γ)` as its growth
    /// certificate.
    pub fn with_driver(
        mut self,
        description: impl Into<String>,
        f: impl Fn(S, S, &[S]) -> S + Send + Sync + 'static,
    ) -> Self {
        self.custom = Some(Arc::new(f));
        self.description = description.into();
        self
    }

    pub fn alpha(&self) -> &Alpha<S> {
        &self.alpha
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_typical(&self) -> bool {
        self.custom.is_none()
    }

    pub fn eval(&self, t: S, y: S, z: &[S]) -> S {
        match &self.custom {
            Some(f) => f(t, y, z),
            None => self.growth_bound(t, y, z),
        }
    }

    /// `α_t + β|y| + γ|z|`.
    pub fn growth_bound(&self, t: S, y: S, z: &[S]) -> S {
        self.alpha.at(t) + self.beta * y.abs() + self.gamma * norm(z)
    }

    /// `∫_t^T e^{β(s−t)} α_s ds`.
    pub fn alpha_integral(&self, t: S, horizon: S) -> Result<S> {
        self.alpha.discounted_integral(self.beta, t, horizon)
    }

    /// Spot check of the growth certificate at random `(t, y, z)` with
    /// `t ∈ [0, T]`, `y, z_k ∈ [−scale, scale]`.
    pub fn verify_certificate(
        &self,
        horizon: S,
        dim: usize,
        scale: S,
        points: usize,
        seed: u64,
    ) -> CertificateCheck<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![S::zero(); dim];
        let mut max_excess = S::neg_infinity();
        let tol = S::lit(1e-12);
        let mut holds = true;
        for _ in 0..points {
            let t = horizon * S::lit(rng.random::<f64>());
            let y = scale * S::lit(2.0 * rng.random::<f64>() - 1.0);
            z.iter_mut()
                .for_each(|zk| *zk = scale * S::lit(2.0 * rng.random::<f64>() - 1.0));
            let bound = self.growth_bound(t, y, &z);
            let excess = self.eval(t, y, &z).abs() - bound;
            max_excess = max_excess.max(excess);
            if excess > tol * (S::one() + bound) {
                holds = false;
            }
        }
        CertificateCheck {
            checked: points,
            max_excess,
            holds,
        }
    }
}
