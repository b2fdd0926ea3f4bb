//! Regression bases on the Brownian state and the least-squares machinery
//! behind every conditional expectation in the crate.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::stats::REDUCTION_BLOCK;
use crate::stochastic::PathEnsemble;

/// Smallest eigenvalue of the normalized normal matrix below which the fit
/// switches to ridge regression.
pub const RIDGE_TRIGGER: f64 = 1e-10;
/// Ridge penalty as a fraction of the trace of the normalized normal matrix.
pub const RIDGE_PENALTY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "family")]
pub enum BasisFamily {
    /// Hermite polynomials of `W_t / sqrt(t)` of total degree at most `degree`.
    Polynomial { degree: usize },
    /// Indicators of a hypercube partition of `[-3, 3]^d` (standardized state,
    /// outer cells unbounded) into `per_axis^d` cells.
    Bins { per_axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegressionBasis {
    family: BasisFamily,
}

impl RegressionBasis {
    pub fn polynomial(degree: usize) -> Result<Self> {
        if degree == 0 {
            return invalid("polynomial basis degree must be at least 1");
        }
        Ok(RegressionBasis {
            family: BasisFamily::Polynomial { degree },
        })
    }

    pub fn bins(per_axis: usize) -> Result<Self> {
        if per_axis < 2 {
            return invalid("indicator basis needs at least two bins per axis");
        }
        Ok(RegressionBasis {
            family: BasisFamily::Bins { per_axis },
        })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// Number of basis functions for a `d`-dimensional state.
    pub fn size(&self, d: usize) -> usize {
        match self.family {
            BasisFamily::Polynomial { degree } => multi_indices(d, degree).len(),
            BasisFamily::Bins { per_axis } => per_axis.pow(d as u32),
        }
    }

    pub fn describe(&self) -> String {
        match self.family {
            BasisFamily::Polynomial { degree } => format!("hermite polynomials, total degree <= {degree}"),
            BasisFamily::Bins { per_axis } => format!("hypercube indicators, {per_axis} bins per axis"),
        }
    }

    /// Design matrix (row-major, `M × K`) at time `t` for states laid out
    /// `[m][k]`. At `t = 0` the state is deterministic and only the constant
    /// function is used.
    pub fn design<S: Scalar>(&self, t: S, states: &[S], d: usize) -> Design<S> {
        let samples = states.len() / d;
        if !(t > S::zero()) {
            return Design {
                cols: 1,
                rows: samples,
                x: vec![S::one(); samples],
            };
        }
        let scale = S::one() / t.sqrt();
        match self.family {
            BasisFamily::Polynomial { degree } => {
                let indices = multi_indices(d, degree);
                let cols = indices.len();
                let mut x = vec![S::zero(); samples * cols];
                x.par_chunks_mut(cols)
                    .zip(states.par_chunks(d))
                    .for_each(|(row, w)| {
                        let herm: Vec<Vec<S>> = w.iter().map(|&wk| hermite(wk * scale, degree)).collect();
                        for (slot, alpha) in row.iter_mut().zip(&indices) {
                            *slot = alpha
                                .iter()
                                .enumerate()
                                .fold(S::one(), |acc, (k, &a)| acc * herm[k][a]);
                        }
                    });
                Design { cols, rows: samples, x }
            }
            BasisFamily::Bins { per_axis } => {
                let cols = per_axis.pow(d as u32);
                let mut x = vec![S::zero(); samples * cols];
                let width = S::lit(6.0) / S::from_usize_lossy(per_axis);
                x.par_chunks_mut(cols)
                    .zip(states.par_chunks(d))
                    .for_each(|(row, w)| {
                        let mut cell = 0usize;
                        for &wk in w {
                            let pos = ((wk * scale + S::lit(3.0)) / width).floor();
                            let b = if pos < S::zero() {
                                0
                            } else {
                                pos.to_usize().unwrap_or(per_axis - 1).min(per_axis - 1)
                            };
                            cell = cell * per_axis + b;
                        }
                        row[cell] = S::one();
                    });
                Design { cols, rows: samples, x }
            }
        }
    }
}

/// Probabilists' Hermite polynomials `He_0 .. He_degree` at `x`.
fn hermite<S: Scalar>(x: S, degree: usize) -> Vec<S> {
    let mut h = Vec::with_capacity(degree + 1);
    h.push(S::one());
    if degree >= 1 {
        h.push(x);
    }
    for n in 1..degree {
        let next = x * h[n] - S::from_usize_lossy(n) * h[n - 1];
        h.push(next);
    }
    h
}

/// Exponent vectors of total degree `<= degree` in `d` variables, graded order.
fn multi_indices(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for a in 0..=left {
            prefix.push(a);
            rec(d, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, degree, &mut Vec::with_capacity(d), &mut out);
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out
}

/// Row-major design matrix.
#[derive(Debug, Clone)]
pub struct Design<S> {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) x: Vec<S>,
}

impl<S: Scalar> Design<S> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, m: usize) -> &[S] {
        &self.x[m * self.cols..(m + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitDiagnostics<S> {
    /// Smallest singular value of the normalized normal matrix `XᵀX / M`.
    pub smallest_singular: S,
    pub ridge: bool,
    pub basis_size: usize,
}

/// Least-squares fit of several responses on a shared design.
#[derive(Debug, Clone)]
pub struct Fit<S> {
    pub coefficients: Vec<Vec<S>>,
    /// Residual standard deviation per response.
    pub residual_sd: Vec<S>,
    pub diagnostics: FitDiagnostics<S>,
}

impl<S: Scalar> Fit<S> {
    pub fn predict(&self, design: &Design<S>, response: usize) -> Vec<S> {
        let beta = &self.coefficients[response];
        design
            .x
            .par_chunks(design.cols)
            .map(|row| row.iter().zip(beta).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Root-mean-square standard error of the fitted values of `response`:
    /// `σ̂ sqrt(K / M)`, the average leverage being `K / M`.
    pub fn fitted_se(&self, response: usize, samples: usize) -> S {
        self.residual_sd[response]
            * (S::from_usize_lossy(self.diagnostics.basis_size) / S::from_usize_lossy(samples)).sqrt()
    }
}

/// Ordinary least squares through the normal equations, with a ridge
/// fallback when the normal matrix is close to singular.
pub fn least_squares<S: Scalar>(design: &Design<S>, responses: &[&[S]]) -> Result<Fit<S>> {
    let (rows, k, r) = (design.rows, design.cols, responses.len());
    if rows == 0 {
        return invalid("cannot fit on an empty sample");
    }
    if responses.iter().any(|y| y.len() != rows) {
        return invalid("response length does not match the design");
    }
    let partial = |start: usize, end: usize| {
        let mut g = vec![S::zero(); k * k];
        let mut b = vec![S::zero(); k * r];
        for m in start..end {
            let row = design.row(m);
            for a in 0..k {
                if row[a] == S::zero() {
                    continue;
                }
                for c in a..k {
                    g[a * k + c] = g[a * k + c] + row[a] * row[c];
                }
                for (j, y) in responses.iter().enumerate() {
                    b[j * k + a] = b[j * k + a] + row[a] * y[m];
                }
            }
        }
        (g, b)
    };
    let blocks: Vec<(Vec<S>, Vec<S>)> = (0..rows.div_ceil(REDUCTION_BLOCK))
        .into_par_iter()
        .map(|blk| partial(blk * REDUCTION_BLOCK, ((blk + 1) * REDUCTION_BLOCK).min(rows)))
        .collect();
    let mut gram = vec![S::zero(); k * k];
    let mut rhs = vec![S::zero(); k * r];
    for (g, b) in blocks {
        gram.iter_mut().zip(g).for_each(|(x, y)| *x = *x + y);
        rhs.iter_mut().zip(b).for_each(|(x, y)| *x = *x + y);
    }
    let n = S::from_usize_lossy(rows);
    for a in 0..k {
        for c in a..k {
            let v = gram[a * k + c] / n;
            gram[a * k + c] = v;
            gram[c * k + a] = v;
        }
    }
    rhs.iter_mut().for_each(|x| *x = *x / n);

    let smallest = smallest_eigenvalue(&gram, k).max(S::zero());
    let ridge = smallest < S::lit(RIDGE_TRIGGER);
    let mut system = gram.clone();
    if ridge {
        let trace: S = (0..k).map(|a| gram[a * k + a]).sum();
        let penalty = S::lit(RIDGE_PENALTY) * trace.max(S::epsilon());
        (0..k).for_each(|a| system[a * k + a] = system[a * k + a] + penalty);
    }
    let chol = cholesky(&system, k).ok_or_else(|| {
        crate::error::LabError::InvalidParameter("normal matrix is not positive definite after ridge".into())
    })?;
    let coefficients: Vec<Vec<S>> = (0..r).map(|j| cholesky_solve(&chol, k, &rhs[j * k..(j + 1) * k])).collect();

    let residual_sd = responses
        .iter()
        .zip(&coefficients)
        .map(|(y, beta)| {
            let ss: Vec<S> = (0..rows.div_ceil(REDUCTION_BLOCK))
                .into_par_iter()
                .map(|blk| {
                    let end = ((blk + 1) * REDUCTION_BLOCK).min(rows);
                    (blk * REDUCTION_BLOCK..end)
                        .map(|m| {
                            let fit: S = design.row(m).iter().zip(beta).map(|(&a, &b)| a * b).sum();
                            let e = y[m] - fit;
                            e * e
                        })
                        .sum::<S>()
                })
                .collect();
            let total = ss.into_iter().fold(S::zero(), |a, b| a + b);
            let dof = if rows > k { rows - k } else { 1 };
            (total / S::from_usize_lossy(dof)).sqrt()
        })
        .collect();

    Ok(Fit {
        coefficients,
        residual_sd,
        diagnostics: FitDiagnostics {
            smallest_singular: smallest,
            ridge,
            basis_size: k,
        },
    })
}

/// Regression estimate of `E[response | W_{t_i}]` on the ensemble.
pub fn conditional_expectation<S: Scalar>(
    basis: &RegressionBasis,
    paths: &PathEnsemble<S>,
    node: usize,
    response: &[S],
) -> Result<(Vec<S>, FitDiagnostics<S>)> {
    let states = paths.positions(node);
    let design = basis.design(paths.grid().time(node), &states, paths.dim());
    let fit = least_squares(&design, &[response])?;
    Ok((fit.predict(&design, 0), fit.diagnostics))
}

fn cholesky<S: Scalar>(a: &[S], k: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s = s - l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(s > S::zero()) {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<S: Scalar>(l: &[S], k: usize, b: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s = s - l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![S::zero(); k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s = s - l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn smallest_eigenvalue<S: Scalar>(a: &[S], k: usize) -> S {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: S = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * k + j] * m[i * k + j])
            .sum();
        let diag: S = (0..k).map(|i| m[i * k + i] * m[i * k + i]).sum();
        if off <= S::epsilon() * S::epsilon() * diag.max(S::min_positive_value()) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = m[p * k + q];
                if apq == S::zero() {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (S::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (mrp, mrq) = (m[r * k + p], m[r * k + q]);
                    m[r * k + p] = c * mrp - s * mrq;
                    m[r * k + q] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let (mpr, mqr) = (m[p * k + r], m[q * k + r]);
                    m[p * k + r] = c * mpr - s * mqr;
                    m[q * k + r] = s * mpr + c * mqr;
                }
            }
        }
    }
    (0..k).map(|i| m[i * k + i]).fold(S::infinity(), S::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::TimeGrid;

    #[test]
    fn basis_sizes() {
        assert_eq!(RegressionBasis::polynomial(4).unwrap().size(1), 5);
        assert_eq!(RegressionBasis::polynomial(2).unwrap().size(2), 6);
        assert_eq!(RegressionBasis::bins(8).unwrap().size(2), 64);
        assert!(RegressionBasis::polynomial(0).is_err());
        assert!(RegressionBasis::bins(1).is_err());
    }

    #[test]
    fn hermite_recurrence() {
        let h = hermite(2.0f64, 4);
        assert_eq!(h, vec![1.0, 2.0, 3.0, 2.0, -5.0]);
    }

    #[test]
    fn exact_polynomial_is_recovered() {
        let states: Vec<f64> = (0..2000).map(|i| (i as f64 / 1000.0) - 1.0).collect();
        let y: Vec<f64> = states.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x.powi(3)).collect();
        let basis = RegressionBasis::polynomial(3).unwrap();
        let design = basis.design(1.0, &states, 1);
        let fit = least_squares(&design, &[&y]).unwrap();
        let pred = fit.predict(&design, 0);
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
        assert!(!fit.diagnostics.ridge);
    }

    #[test]
    fn deterministic_state_uses_constant() {
        let basis = RegressionBasis::polynomial(4).unwrap();
        let d = basis.design(0.0f64, &[0.0; 10], 1);
        assert_eq!(d.cols(), 1);
    }

    #[test]
    fn empty_bins_trigger_ridge() {
        // All states in one cell: the indicator normal matrix is singular.
        let basis = RegressionBasis::bins(4).unwrap();
        let states = vec![0.1f64; 100];
        let design = basis.design(1.0, &states, 1);
        let y = vec![2.0; 100];
        let fit = least_squares(&design, &[&y]).unwrap();
        assert!(fit.diagnostics.ridge);
        let pred = fit.predict(&design, 0);
        assert!((pred[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn jacobi_eigenvalue() {
        let a = [2.0f64, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0];
        assert!((smallest_eigenvalue(&a, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_expectation_of_terminal_point() {
        let grid = TimeGrid::uniform(1.0f64, 4).unwrap();
        let paths = PathEnsemble::sample(&grid, 1, 50_000, 3).unwrap();
        let wt = paths.terminal_positions();
        let (fitted, _) = conditional_expectation(&RegressionBasis::polynomial(2).unwrap(), &paths, 2, &wt).unwrap();
        let w2 = paths.positions(2);
        let mse = fitted.iter().zip(&w2).map(|(f, w)| (f - w).powi(2)).sum::<f64>() / w2.len() as f64;
        assert!(mse.sqrt() < 0.01, "E[W_1 | W_0.5] = W_0.5, rms error {}", mse.sqrt());
    }
}
