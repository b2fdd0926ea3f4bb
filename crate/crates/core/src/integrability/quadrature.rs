//! Adaptive Gauss–Kronrod quadrature and Gaussian expectations over growing
//! truncation radii, with a finite/divergent decision from the truncated values.

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel<S> {
    a: S,
    b: S,
    value: S,
    error: S,
}

fn evaluate<S: Scalar, F: Fn(S) -> S + ?Sized>(f: &F, x: S) -> Result<S> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(LabError::Evaluation { x: x.as_f64() })
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod<S: Scalar, F: Fn(S) -> S + ?Sized>(f: &F, a: S, b: S) -> Result<Panel<S>> {
    let half = S::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = evaluate(f, center)?;
    let mut kron = fc * S::lit(WGK[7]);
    let mut gauss = fc * S::lit(WG[3]);
    let mut abs_sum = kron.abs();
    let mut samples = [S::zero(); 15];
    samples[7] = fc;
    for j in 0..7 {
        let dx = half_len * S::lit(XGK[j]);
        let (f1, f2) = (evaluate(f, center - dx)?, evaluate(f, center + dx)?);
        samples[j] = f1;
        samples[14 - j] = f2;
        let w = S::lit(WGK[j]);
        kron = kron + w * (f1 + f2);
        abs_sum = abs_sum + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + S::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = kron * half;
    let mut asc = S::lit(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        asc = asc + S::lit(WGK[j]) * ((samples[j] - mean).abs() + (samples[14 - j] - mean).abs());
    }
    let value = kron * half_len;
    let resabs = abs_sum * half_len.abs();
    let resasc = asc * half_len.abs();
    let mut error = ((kron - gauss) * half_len).abs();
    if resasc > S::zero() && error > S::zero() {
        error = resasc * S::one().min((S::lit(200.0) * error / resasc).powf(S::lit(1.5)));
    }
    let floor = S::lit(50.0) * S::epsilon() * resabs;
    if resabs > S::min_positive_value() / (S::lit(50.0) * S::epsilon()) && error < floor {
        error = floor;
    }
    Ok(Panel { a, b, value, error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<S> {
    pub value: S,
    pub abs_error: S,
    pub panels: usize,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// `breakpoints` inside `(a, b)` seed the initial partition (kinks, jumps).
/// Refinement stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol |I|)` or after `max_panels` panels.
pub fn integrate<S: Scalar, F: Fn(S) -> S + ?Sized>(
    f: &F,
    a: S,
    b: S,
    breakpoints: &[S],
    abs_tol: S,
    rel_tol: S,
    max_panels: usize,
) -> Result<QuadratureResult<S>> {
    if !(a.is_finite() && b.is_finite()) || !(a <= b) {
        return invalid(format!("integration interval [{a}, {b}] is not a finite interval"));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: S::zero(),
            abs_error: S::zero(),
            panels: 0,
            converged: true,
        });
    }
    let mut cuts: Vec<S> = vec![a];
    let mut inner: Vec<S> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    let mut panels = cuts
        .windows(2)
        .map(|w| kronrod(f, w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let max_panels = max_panels.max(panels.len());
    loop {
        let value: S = panels.iter().map(|p| p.value).sum();
        let error: S = panels.iter().map(|p| p.error).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        if error <= target || panels.len() >= max_panels {
            return Ok(QuadratureResult {
                value,
                abs_error: error,
                panels: panels.len(),
                converged: error <= target,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = S::lit(0.5) * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Interval cannot be split further in this precision.
            return Ok(QuadratureResult {
                value,
                abs_error: error,
                panels: panels.len() + 1,
                converged: false,
            });
        }
        panels.push(kronrod(f, p.a, mid)?);
        panels.push(kronrod(f, mid, p.b)?);
    }
}

/// Integrand of a standard-normal expectation `E[g(X)]`.
pub enum GaussIntegrand<'a, S> {
    /// `g(x)` in linear space; may be signed.
    Value(&'a (dyn Fn(S) -> S + Sync)),
    /// `ln g(x)` of a nonnegative `g` (`-inf` where `g = 0`). The Gaussian
    /// weight is folded in before exponentiating, so `g` itself may exceed
    /// the floating-point range.
    LnMagnitude(&'a (dyn Fn(S) -> S + Sync)),
}

impl<S: Scalar> GaussIntegrand<'_, S> {
    fn weighted(&self, x: S) -> S {
        let ln_norm = S::lit(0.918_938_533_204_672_7); // ln sqrt(2π)
        match self {
            GaussIntegrand::Value(g) => {
                let gx = g(x);
                if !gx.is_finite() {
                    return gx;
                }
                let w = (-S::lit(0.5) * x * x - ln_norm).exp();
                if w == S::zero() {
                    S::zero()
                } else {
                    gx * w
                }
            }
            GaussIntegrand::LnMagnitude(lg) => {
                let l = lg(x);
                if l == S::neg_infinity() {
                    S::zero()
                } else {
                    (l - S::lit(0.5) * x * x - ln_norm).exp()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussOptions<S> {
    /// Ascending truncation radii tried first.
    pub radii: Vec<S>,
    /// Relative agreement between successive truncations required for FINITE.
    pub rel_tol: S,
    /// Radii are doubled past the last entry of `radii` up to this bound.
    pub max_radius: S,
    /// Points where the integrand may be non-smooth.
    pub breakpoints: Vec<S>,
    pub max_panels: usize,
}

impl<S: Scalar> Default for GaussOptions<S> {
    fn default() -> Self {
        GaussOptions {
            radii: [10.0, 20.0, 30.0, 40.0].iter().map(|&r| S::lit(r)).collect(),
            rel_tol: S::lit(1e-8),
            max_radius: S::lit(1280.0),
            breakpoints: vec![S::zero()],
            max_panels: 2000,
        }
    }
}

/// The truncated integrals `I_R = ∫_{-R}^{R} g φ` and the least-squares slope
/// of `ln I_R` against `R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationEvidence<S> {
    pub radii: Vec<S>,
    pub truncated: Vec<S>,
    pub growth_exponent: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum GaussOutcome<S> {
    #[serde(rename = "FINITE")]
    Finite { value: S, error: S, radius: S },
    #[serde(rename = "DIVERGENT")]
    Divergent(TruncationEvidence<S>),
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive(TruncationEvidence<S>),
}

impl<S: Scalar> GaussOutcome<S> {
    pub fn finite_value(&self) -> Option<S> {
        match self {
            GaussOutcome::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, GaussOutcome::Divergent(_))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, GaussOutcome::Finite { .. })
    }

    pub fn status(&self) -> &'static str {
        match self {
            GaussOutcome::Finite { .. } => "FINITE",
            GaussOutcome::Divergent(_) => "DIVERGENT",
            GaussOutcome::Inconclusive(_) => "INCONCLUSIVE",
        }
    }
}

/// Least-squares slope of `ln I` against `R` over the positive entries.
fn growth_exponent<S: Scalar>(radii: &[S], values: &[S]) -> S {
    let pts: Vec<(S, S)> = radii
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > S::zero())
        .map(|(&r, &v)| (r, v.ln()))
        .collect();
    if pts.len() < 2 {
        return S::nan();
    }
    if pts.iter().any(|(_, l)| l.is_infinite()) {
        return S::infinity();
    }
    let n = S::from_usize_lossy(pts.len());
    let mr = pts.iter().map(|p| p.0).sum::<S>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<S>() / n;
    let sxy = pts.iter().map(|p| (p.0 - mr) * (p.1 - ml)).sum::<S>();
    let sxx = pts.iter().map(|p| (p.0 - mr) * (p.0 - mr)).sum::<S>();
    sxy / sxx
}

/// Divergence: every truncation grows by more than `rel_tol`, the growth per
/// unit radius does not shrink, and `ln I_R` has a positive fitted slope.
fn looks_divergent<S: Scalar>(radii: &[S], values: &[S], rel_tol: S) -> bool {
    if values.len() < 4 || values.iter().any(|&v| !(v > S::zero())) {
        return false;
    }
    if values.iter().any(|v| v.is_infinite()) {
        return true;
    }
    let growing = values.windows(2).all(|w| w[1] > w[0] * (S::one() + rel_tol));
    let rates: Vec<S> = (1..values.len())
        .map(|k| (values[k] - values[k - 1]) / (radii[k] - radii[k - 1]))
        .collect();
    let accelerating = rates.windows(2).all(|r| r[1] >= r[0] * (S::one() - S::lit(1e-6)));
    growing && accelerating && growth_exponent(radii, values) > S::zero()
}

/// `E[g(X)]` for `X ~ N(0, 1)`, decided FINITE / DIVERGENT from the sequence of
/// truncated integrals over `[-R, R]`.
pub fn gauss_expectation<S: Scalar>(
    integrand: &GaussIntegrand<'_, S>,
    options: &GaussOptions<S>,
) -> Result<GaussOutcome<S>> {
    if options.radii.is_empty()
        || options.radii.iter().any(|&r| !(r > S::zero()))
        || options.radii.windows(2).any(|w| !(w[1] > w[0]))
    {
        return invalid("truncation radii must be positive and strictly increasing");
    }
    if !(options.rel_tol > S::zero()) {
        return invalid("relative tolerance must be positive");
    }
    let f = |x: S| integrand.weighted(x);
    let quad_rel = options.rel_tol * S::lit(1e-2);
    let tiny = S::min_positive_value();
    let mut radii = options.radii.clone();
    let r0 = radii[0];
    let (first, mut quad_error) =
        match integrate(&f, -r0, r0, &options.breakpoints, tiny, quad_rel, options.max_panels) {
            Ok(q) => (q.value, q.abs_error),
            Err(LabError::Evaluation { .. }) => (S::infinity(), S::zero()),
            Err(e) => return Err(e),
        };
    let mut values = vec![first];
    let mut k = 1;
    loop {
        if k == radii.len() {
            let next = radii[k - 1] * S::lit(2.0);
            if next > options.max_radius {
                break;
            }
            radii.push(next);
        }
        let prev = values[k - 1];
        let (inner, outer) = (radii[k - 1], radii[k]);
        let abs_tol = (quad_rel * prev.abs()).max(tiny);
        let shell = if prev.is_infinite() {
            S::infinity()
        } else {
            let left = integrate(&f, -outer, -inner, &options.breakpoints, abs_tol, quad_rel, options.max_panels);
            let right = integrate(&f, inner, outer, &options.breakpoints, abs_tol, quad_rel, options.max_panels);
            match (left, right) {
                (Ok(l), Ok(r)) => {
                    quad_error = quad_error + l.abs_error + r.abs_error;
                    l.value + r.value
                }
                (Err(LabError::Evaluation { .. }), _) | (_, Err(LabError::Evaluation { .. })) => {
                    S::infinity()
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        };
        let current = prev + shell;
        values.push(current);
        let change = (current - prev).abs();
        if current.is_finite() && change <= options.rel_tol * current.abs() {
            return Ok(GaussOutcome::Finite {
                value: current,
                error: change + quad_error,
                radius: outer,
            });
        }
        if values.len() >= 4 && looks_divergent(&radii[..values.len()], &values, options.rel_tol) {
            let growth_exponent = growth_exponent(&radii[..values.len()], &values);
            return Ok(GaussOutcome::Divergent(TruncationEvidence {
                radii: radii[..values.len()].to_vec(),
                truncated: values,
                growth_exponent,
            }));
        }
        k += 1;
    }
    let growth_exponent = growth_exponent(&radii, &values);
    Ok(GaussOutcome::Inconclusive(TruncationEvidence {
        radii,
        truncated: values,
        growth_exponent,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(&|x: f64| 3.0 * x * x - x, -1.0, 2.0, &[], 1e-12, 1e-12, 50).unwrap();
        assert!((r.value - 7.5).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn kinked_integrand_matches_simpson() {
        let f = |x: f64| (x.abs() - 0.3).abs().sqrt() * (-x * x).exp();
        let r = integrate(&f, -4.0, 4.0, &[-0.3, 0.3], 1e-13, 1e-11, 2000).unwrap();
        let reference = simpson(f, -4.0, -0.3, 400_000) + simpson(f, -0.3, 0.3, 400_000) + simpson(f, 0.3, 4.0, 400_000);
        assert!((r.value - reference).abs() < 2e-6);
    }

    #[test]
    fn normal_density_integrates_to_one() {
        let one = |_x: f64| 1.0;
        let out = gauss_expectation(&GaussIntegrand::Value(&one), &GaussOptions::default()).unwrap();
        assert!((out.finite_value().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_mgf() {
        let g = |x: f64| x.exp();
        let out = gauss_expectation(&GaussIntegrand::Value(&g), &GaussOptions::default()).unwrap();
        assert!((out.finite_value().unwrap() - 0.5f64.exp()).abs() < 1e-9);
        let lg = |x: f64| x;
        let out = gauss_expectation(&GaussIntegrand::LnMagnitude(&lg), &GaussOptions::default()).unwrap();
        assert!((out.finite_value().unwrap() - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn quadratic_exponent_diverges() {
        // g = e^{x²/2 + 0.1|x|}: the weighted integrand grows like e^{0.1|x|}.
        let lg = |x: f64| 0.5 * x * x + 0.1 * x.abs();
        let out = gauss_expectation(&GaussIntegrand::LnMagnitude(&lg), &GaussOptions::default()).unwrap();
        match out {
            GaussOutcome::Divergent(ev) => assert!((ev.growth_exponent - 0.1).abs() < 0.02),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn slowly_decaying_tail_extends_radius() {
        // Weighted integrand e^{-0.1|x|}/sqrt(2π): total 20/sqrt(2π).
        let lg = |x: f64| 0.5 * x * x - 0.1 * x.abs();
        let out = gauss_expectation(&GaussIntegrand::LnMagnitude(&lg), &GaussOptions::default()).unwrap();
        match out {
            GaussOutcome::Finite { value, radius, .. } => {
                assert!(radius > 40.0);
                assert!((value - 20.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-6);
            }
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn invalid_radii_rejected() {
        let one = |_x: f64| 1.0;
        let opts = GaussOptions {
            radii: vec![10.0, 5.0],
            ..GaussOptions::default()
        };
        assert!(gauss_expectation(&GaussIntegrand::Value(&one), &opts).is_err());
    }

    #[test]
    fn non_evaluable_value_integrand_reports_failure() {
        let g = |x: f64| if x > 1.0 { f64::NAN } else { 1.0 };
        let r = integrate(&g, 0.0, 2.0, &[], 1e-10, 1e-10, 10);
        assert!(matches!(r, Err(LabError::Evaluation { .. })));
    }
}
