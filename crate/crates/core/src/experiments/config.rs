use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dual::AlphaConfig;
use crate::error::{LabError, Result};
use crate::integrability::{catalog, TerminalValue};
use crate::lsmc::RegressionBasis;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    YoungSweep,
    PhiMoment,
    Integrability,
    Solve,
    Ladder,
    Counterexample,
    Bound,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::YoungSweep,
        ExperimentKind::PhiMoment,
        ExperimentKind::Integrability,
        ExperimentKind::Solve,
        ExperimentKind::Ladder,
        ExperimentKind::Counterexample,
        ExperimentKind::Bound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::YoungSweep => "young-sweep",
            ExperimentKind::PhiMoment => "phi-moment",
            ExperimentKind::Integrability => "integrability",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Ladder => "ladder",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Bound => "bound",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl FromStr for OutputFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(LabError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Terminal values selectable from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalConfig {
    Constant { value: f64 },
    Brownian,
    Clamp { lo: f64, hi: f64 },
    ExpAbs { k: f64 },
    /// `expm1((|W_T| − μ)²/2)`; `μ` defaults to the top-level `mu`.
    Counterexample {
        #[serde(default)]
        mu: Option<f64>,
    },
    /// `|W_T|^p sgn(W_T)`.
    SignedPower { p: f64 },
    RunningMaximum,
}

impl TerminalConfig {
    pub fn build<S: Scalar>(&self, default_mu: f64) -> Result<TerminalValue<S>> {
        Ok(match *self {
            TerminalConfig::Constant { value } => catalog::constant(S::lit(value)),
            TerminalConfig::Brownian => catalog::brownian_terminal(),
            TerminalConfig::Clamp { lo, hi } => {
                if !(lo < hi) {
                    return Err(LabError::Config(format!("clamp needs lo < hi, got [{lo}, {hi}]")));
                }
                catalog::clamp(S::lit(lo), S::lit(hi))
            }
            TerminalConfig::ExpAbs { k } => catalog::exp_abs(S::lit(k)),
            TerminalConfig::Counterexample { mu } => {
                let mu = mu.unwrap_or(default_mu);
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(LabError::Config(format!("counterexample needs mu in (0, 1), got {mu}")));
                }
                catalog::counterexample(S::lit(mu))
            }
            TerminalConfig::SignedPower { p } => {
                if !(p > 0.0) {
                    return Err(LabError::Config(format!("signed power needs p > 0, got {p}")));
                }
                let ps = S::lit(p);
                TerminalValue::markovian_1d(format!("|W_T|^{p} sgn(W_T)"), move |x: S| x.abs().powf(ps) * x.signum())
                    .with_kinks(vec![S::zero()])
            }
            TerminalConfig::RunningMaximum => catalog::running_maximum(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasisConfig {
    Polynomial { degree: usize },
    Bins { per_axis: usize },
}

impl BasisConfig {
    pub fn build(&self) -> Result<RegressionBasis> {
        match *self {
            BasisConfig::Polynomial { degree } => RegressionBasis::polynomial(degree),
            BasisConfig::Bins { per_axis } => RegressionBasis::bins(per_axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    /// Dyadic exponents `j` of the rungs `n_j = p_j = 2^j`.
    pub j_from: i32,
    pub j_to: i32,
    pub min_binding: usize,
    pub growth_window: usize,
    pub hitting_levels: Vec<f64>,
    pub basis: BasisConfig,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            j_from: 4,
            j_to: 14,
            min_binding: 10,
            growth_window: 3,
            hitting_levels: vec![10.0, 100.0],
            basis: BasisConfig::Bins { per_axis: 16 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub triples: usize,
    pub lambda_range: [f64; 2],
    pub x_range: [f64; 2],
    pub y_max: f64,
    /// Smallest admissible relative gap is `-tolerance`.
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            triples: 100_000,
            lambda_range: [0.1, 10.0],
            x_range: [-20.0, 20.0],
            y_max: 1e8,
            tolerance: 1e-12,
        }
    }
}

/// One experiment. Every field has a default, so a configuration file only
/// lists what differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub horizon: f64,
    pub dim: usize,
    pub beta: f64,
    /// Defaults to 1 for ladders and the counterexample, 0.5 otherwise.
    pub gamma: Option<f64>,
    pub alpha: AlphaConfig,
    pub lambda: f64,
    pub mu: f64,
    pub terminal: Option<TerminalConfig>,
    /// Defaults to 20 for ladders and the counterexample, 10 for the
    /// exponential-moment check and 50 otherwise.
    pub steps: Option<usize>,
    pub samples: usize,
    pub basis: BasisConfig,
    /// Admissible relative error of `Y_0` against a closed-form oracle.
    pub oracle_rel_tol: f64,
    /// Truncation radii for Gaussian quadrature.
    pub radii: Vec<f64>,
    pub quadrature_rel_tol: f64,
    /// Moment exponents in integrability reports.
    pub moments: Vec<f64>,
    /// Random bang-bang controls in the exponential-moment experiment.
    pub controls: usize,
    pub sweep: SweepConfig,
    pub ladder: LadderConfig,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            seed: 1,
            horizon: 1.0,
            dim: 1,
            beta: 0.0,
            gamma: None,
            alpha: AlphaConfig::Zero,
            lambda: 2.0,
            mu: 0.6,
            terminal: None,
            steps: None,
            samples: 100_000,
            basis: BasisConfig::Polynomial { degree: 4 },
            oracle_rel_tol: 0.02,
            radii: vec![10.0, 20.0, 30.0, 40.0],
            quadrature_rel_tol: 1e-8,
            moments: vec![1.0, 2.0],
            controls: 20,
            sweep: SweepConfig::default(),
            ladder: LadderConfig::default(),
            out: None,
            format: OutputFormat::Both,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn gamma_for(&self, kind: ExperimentKind) -> f64 {
        self.gamma.unwrap_or(match kind {
            ExperimentKind::Ladder | ExperimentKind::Counterexample => 1.0,
            _ => 0.5,
        })
    }

    pub fn steps_for(&self, kind: ExperimentKind) -> usize {
        self.steps.unwrap_or(match kind {
            ExperimentKind::Ladder | ExperimentKind::Counterexample => 20,
            ExperimentKind::PhiMoment => 10,
            _ => 50,
        })
    }

    /// The terminal value, defaulting per experiment kind.
    pub fn terminal_or_default(&self, kind: ExperimentKind) -> TerminalConfig {
        self.terminal.clone().unwrap_or(match kind {
            ExperimentKind::Counterexample | ExperimentKind::Ladder => TerminalConfig::Counterexample { mu: None },
            ExperimentKind::Bound => TerminalConfig::ExpAbs { k: 0.5 },
            _ => TerminalConfig::Clamp { lo: -2.0, hi: 2.0 },
        })
    }

    /// Checks every precondition of `kind` without computing anything.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if let Some(k) = self.kind {
            if k != kind {
                return bad(format!("configuration is for '{k}', requested '{kind}'"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        let gamma = self.gamma_for(kind);
        let steps = self.steps_for(kind);
        if !(self.beta >= 0.0) || !(gamma >= 0.0) {
            return bad(format!("beta and gamma must be nonnegative, got {} and {gamma}", self.beta));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.oracle_rel_tol > 0.0) {
            return bad("oracle tolerance must be positive".into());
        }
        if steps == 0 {
            return bad("the time grid needs at least one step".into());
        }
        if self.samples < 2 {
            return bad("at least two samples are needed".into());
        }
        self.alpha.build::<f64>()?;
        let basis = self.basis.build()?;
        let terminal = self.terminal_or_default(kind);
        terminal.build::<f64>(self.mu)?;
        let product = self.lambda * gamma * gamma * self.horizon;
        match kind {
            ExperimentKind::YoungSweep => {
                let s = &self.sweep;
                if s.triples == 0 {
                    return bad("the sweep needs at least one triple".into());
                }
                if !(s.lambda_range[0] > 0.0 && s.lambda_range[0] <= s.lambda_range[1]) {
                    return bad(format!("lambda range {:?} is not a positive interval", s.lambda_range));
                }
                if !(s.x_range[0] <= s.x_range[1]) || !(s.y_max >= 0.0) || !(s.tolerance >= 0.0) {
                    return bad("sweep ranges must be ordered and nonnegative".into());
                }
            }
            ExperimentKind::PhiMoment | ExperimentKind::Bound => {
                if !(gamma > 0.0) {
                    return bad("gamma must be positive".into());
                }
                if !(product < 1.0) {
                    return Err(LabError::SufficiencyViolated { product });
                }
            }
            ExperimentKind::Counterexample => {
                if !(self.mu > 0.0 && self.mu < 1.0) {
                    return bad(format!("mu must lie in (0, 1), got {}", self.mu));
                }
            }
            ExperimentKind::Integrability | ExperimentKind::Solve | ExperimentKind::Ladder => {}
        }
        if matches!(kind, ExperimentKind::Solve | ExperimentKind::Bound) && self.samples < 10 * basis.size(self.dim) {
            return bad(format!(
                "{} samples are fewer than 10 x basis size {}",
                self.samples,
                basis.size(self.dim)
            ));
        }
        if matches!(kind, ExperimentKind::Ladder | ExperimentKind::Counterexample) {
            let l = &self.ladder;
            if l.j_to - l.j_from < 2 {
                return bad(format!("ladder needs at least 3 rungs, got j = {}..={}", l.j_from, l.j_to));
            }
            if l.hitting_levels.iter().any(|&k| !(k > 0.0)) {
                return bad("hitting levels must be positive".into());
            }
            let lb = l.basis.build()?;
            if self.samples < 10 * lb.size(self.dim) {
                return bad("too few samples for the ladder basis".into());
            }
        }
        if self.beta * self.horizon / steps as f64 >= 1.0 {
            return bad("beta * dt must be below 1".into());
        }
        if self.radii.is_empty() || self.radii.windows(2).any(|w| !(w[1] > w[0])) || self.radii[0] <= 0.0 {
            return bad("quadrature radii must be positive and increasing".into());
        }
        Ok(())
    }
}
