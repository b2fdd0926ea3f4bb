use rayon::prelude::*;

use super::control::ControlProcess;
use super::paths::PathEnsemble;
use crate::error::{LabError, Result};
use crate::scalar::Scalar;
use crate::stats::{mean_estimate, Estimate};

/// Left-endpoint sums `Σ_{j >= from} q[m][j] · ΔW[m][j]`, one per sample.
pub fn stochastic_integral_from<S: Scalar>(
    paths: &PathEnsemble<S>,
    control: &ControlProcess<S>,
    from: usize,
) -> Result<Vec<S>> {
    control.check_against(paths)?;
    let (d, n) = (paths.dim(), paths.steps());
    let from = from.min(n);
    Ok((0..paths.samples())
        .into_par_iter()
        .map(|m| {
            let mut acc = S::zero();
            for j in from..n {
                let dw = paths.increment(m, j);
                let q = control.at(m, j);
                for k in 0..d {
                    acc = acc + q[k] * dw[k];
                }
            }
            acc
        })
        .collect())
}

/// `∫_0^T q dW` per sample.
pub fn stochastic_integral<S: Scalar>(
    paths: &PathEnsemble<S>,
    control: &ControlProcess<S>,
) -> Result<Vec<S>> {
    stochastic_integral_from(paths, control, 0)
}

/// Density process `M^q_{t_i} = exp(Σ_{j<i} q_j·ΔW_j − ½ Σ_{j<i} |q_j|² Δ_j)`,
/// stored as logarithms `[m][i]` for `i = 0..=N`.
#[derive(Debug, Clone)]
pub struct GirsanovWeights<S> {
    nodes: usize,
    log_weights: Vec<S>,
}

impl<S: Scalar> GirsanovWeights<S> {
    pub fn samples(&self) -> usize {
        self.log_weights.len() / self.nodes
    }

    /// Number of grid nodes `N + 1`.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn log_weight(&self, m: usize, i: usize) -> S {
        self.log_weights[m * self.nodes + i]
    }

    pub fn weight(&self, m: usize, i: usize) -> S {
        self.log_weight(m, i).exp()
    }

    /// `M^q_{t_i}` for every sample.
    pub fn at_node(&self, i: usize) -> Vec<S> {
        (0..self.samples()).map(|m| self.weight(m, i)).collect()
    }

    /// `M^q_T / M^q_{t_i}` for every sample.
    pub fn ratio_to_terminal(&self, i: usize) -> Vec<S> {
        let last = self.nodes - 1;
        (0..self.samples())
            .map(|m| (self.log_weight(m, last) - self.log_weight(m, i)).exp())
            .collect()
    }
}

pub fn girsanov_weights<S: Scalar>(
    paths: &PathEnsemble<S>,
    control: &ControlProcess<S>,
) -> Result<GirsanovWeights<S>> {
    control.check_against(paths)?;
    let (d, n) = (paths.dim(), paths.steps());
    let grid = paths.grid();
    let half = S::lit(0.5);
    let mut log_weights = vec![S::zero(); paths.samples() * (n + 1)];
    log_weights
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(m, out)| {
            let mut acc = S::zero();
            for j in 0..n {
                let dw = paths.increment(m, j);
                let q = control.at(m, j);
                let mut drift = S::zero();
                let mut sq = S::zero();
                for k in 0..d {
                    drift = drift + q[k] * dw[k];
                    sq = sq + q[k] * q[k];
                }
                acc = acc + drift - half * sq * grid.dt(j);
                out[j + 1] = acc;
            }
        });
    Ok(GirsanovWeights {
        nodes: n + 1,
        log_weights,
    })
}

/// `Σ_m M^q_{t_at}[m] v[m] / M` with its sample standard error.
pub fn weighted_expectation<S: Scalar>(
    values: &[S],
    weights: &GirsanovWeights<S>,
    at: usize,
) -> Result<Estimate<S>> {
    if values.is_empty() || weights.samples() == 0 {
        return Err(LabError::EmptyEnsemble);
    }
    if values.len() != weights.samples() {
        return Err(LabError::EnsembleMismatch(format!(
            "{} values against {} weights",
            values.len(),
            weights.samples()
        )));
    }
    if at >= weights.nodes() {
        return Err(LabError::InvalidParameter(format!(
            "node {at} outside a grid with {} nodes",
            weights.nodes()
        )));
    }
    let products: Vec<S> = values
        .par_iter()
        .enumerate()
        .map(|(m, &v)| {
            if v == S::zero() {
                S::zero()
            } else {
                v * weights.weight(m, at)
            }
        })
        .collect();
    mean_estimate(&products)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sample_variance;
    use crate::stochastic::TimeGrid;

    #[test]
    fn zero_integrand_vanishes() {
        let p = PathEnsemble::sample(&TimeGrid::uniform(1.0f64, 10).unwrap(), 1, 1000, 1).unwrap();
        let q = ControlProcess::zero(&p, 1.0).unwrap();
        assert!(stochastic_integral(&p, &q).unwrap().iter().all(|&x| x == 0.0));
        let w = girsanov_weights(&p, &q).unwrap();
        assert!((0..1000).all(|m| (0..=10).all(|i| w.weight(m, i) == 1.0)));
    }

    #[test]
    fn constant_integrand_telescopes() {
        let p = PathEnsemble::sample(&TimeGrid::uniform(1.0f64, 16).unwrap(), 1, 1000, 2).unwrap();
        let q = ControlProcess::constant(&p, 0.75, &[0.75]).unwrap();
        let ints = stochastic_integral(&p, &q).unwrap();
        let wt = p.terminal_positions();
        for (a, b) in ints.iter().zip(&wt) {
            assert!((a - 0.75 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn ito_isometry_for_unit_integrand() {
        let p = PathEnsemble::sample(&TimeGrid::uniform(1.0f64, 4).unwrap(), 1, 1_000_000, 3).unwrap();
        let q = ControlProcess::constant(&p, 1.0, &[1.0]).unwrap();
        let var = sample_variance(&stochastic_integral(&p, &q).unwrap()).unwrap();
        assert!((var - 1.0).abs() <= 3.0 * (2.0f64 / 999_999.0).sqrt());
    }

    #[test]
    fn weights_start_at_one_and_are_positive() {
        let p = PathEnsemble::sample(&TimeGrid::uniform(1.0f64, 20).unwrap(), 2, 2000, 4).unwrap();
        let q = ControlProcess::random_bang_bang(&p, 0.9, 17).unwrap();
        let w = girsanov_weights(&p, &q).unwrap();
        for m in 0..p.samples() {
            assert_eq!(w.weight(m, 0), 1.0);
            assert!((0..=20).all(|i| w.weight(m, i) > 0.0));
        }
    }

    #[test]
    fn constant_weights_and_values() {
        let p = PathEnsemble::sample(&TimeGrid::uniform(1.0f64, 2).unwrap(), 1, 100, 5).unwrap();
        let w = girsanov_weights(&p, &ControlProcess::zero(&p, 1.0).unwrap()).unwrap();
        let est = weighted_expectation(&vec![3.25; 100], &w, 2).unwrap();
        assert_eq!(est.value, 3.25);
        assert_eq!(est.std_error, 0.0);
        assert!(weighted_expectation(&[], &w, 2).is_err());
    }
}
