use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::paths::{PathEnsemble, PathView};
use crate::error::{invalid, LabError, Result};
use crate::scalar::{norm, Scalar};

/// Adapted control, piecewise constant on grid intervals, with `|q| <= γ`.
///
/// Values are stored `[m][i][k]` for steps `i = 0..N`.
#[derive(Debug, Clone)]
pub struct ControlProcess<S> {
    bound: S,
    dim: usize,
    samples: usize,
    steps: usize,
    values: Vec<S>,
}

fn check_bound<S: Scalar>(bound: S) -> Result<()> {
    if !(bound > S::zero()) || !bound.is_finite() {
        return invalid(format!("control bound must be positive, got {bound}"));
    }
    Ok(())
}

impl<S: Scalar> ControlProcess<S> {
    fn validated(bound: S, dim: usize, samples: usize, steps: usize, values: Vec<S>) -> Result<Self> {
        check_bound(bound)?;
        if values.len() != samples * steps * dim {
            return invalid(format!(
                "control buffer has {} entries, expected {}",
                values.len(),
                samples * steps * dim
            ));
        }
        let slack = bound * (S::one() + S::lit(1e-12));
        if let Some((idx, q)) = values
            .chunks(dim)
            .enumerate()
            .find(|(_, q)| !(norm(q) <= slack))
        {
            return Err(LabError::ControlBound {
                sample: idx / steps,
                node: idx % steps,
                norm: norm(q).as_f64(),
                bound: bound.as_f64(),
            });
        }
        Ok(ControlProcess {
            bound,
            dim,
            samples,
            steps,
            values,
        })
    }

    /// The same deterministic vector on every sample and step.
    pub fn constant(paths: &PathEnsemble<S>, bound: S, q: &[S]) -> Result<Self> {
        if q.len() != paths.dim() {
            return invalid(format!(
                "control of dimension {} for {}-dimensional paths",
                q.len(),
                paths.dim()
            ));
        }
        let values = q
            .iter()
            .copied()
            .cycle()
            .take(paths.samples() * paths.steps() * paths.dim())
            .collect();
        Self::validated(bound, paths.dim(), paths.samples(), paths.steps(), values)
    }

    pub fn zero(paths: &PathEnsemble<S>, bound: S) -> Result<Self> {
        Self::constant(paths, bound, &vec![S::zero(); paths.dim()])
    }

    /// Builds `q[m][i] = rule(history of sample m up to t_i, i)`.
    ///
    /// The rule only sees increments before node `i`, so the result is adapted.
    pub fn from_rule<F>(paths: &PathEnsemble<S>, bound: S, rule: F) -> Result<Self>
    where
        F: Fn(&PathView<'_, S>, usize) -> Vec<S> + Sync,
    {
        let (d, n) = (paths.dim(), paths.steps());
        let mut values = vec![S::zero(); paths.samples() * n * d];
        let shape_error = std::sync::atomic::AtomicBool::new(false);
        values
            .par_chunks_mut(n * d)
            .enumerate()
            .for_each(|(m, out)| {
                let path = paths.path(m);
                for i in 0..n {
                    let q = rule(&path.up_to(i), i);
                    if q.len() != d {
                        shape_error.store(true, std::sync::atomic::Ordering::Relaxed);
                        return;
                    }
                    out[i * d..(i + 1) * d].copy_from_slice(&q);
                }
            });
        if shape_error.into_inner() {
            return invalid("control rule returned a vector of the wrong dimension");
        }
        Self::validated(bound, d, paths.samples(), n, values)
    }

    /// Raw values laid out `[m][i][k]`.
    pub fn from_values(paths: &PathEnsemble<S>, bound: S, values: Vec<S>) -> Result<Self> {
        Self::validated(bound, paths.dim(), paths.samples(), paths.steps(), values)
    }

    /// Bang-bang feedback `q = γ z / |z|` (for `d = 1`, `γ sgn(z)` with `sgn(0) = +1`).
    ///
    /// `z_nodes[i]` holds `Z_{t_i}` for every sample, laid out `[m][k]`.
    pub fn feedback(paths: &PathEnsemble<S>, bound: S, z_nodes: &[Vec<S>]) -> Result<Self> {
        let (d, n, samples) = (paths.dim(), paths.steps(), paths.samples());
        if z_nodes.len() < n || z_nodes.iter().take(n).any(|z| z.len() != samples * d) {
            return Err(LabError::EnsembleMismatch(
                "feedback source does not match the path ensemble".into(),
            ));
        }
        let mut values = vec![S::zero(); samples * n * d];
        values
            .par_chunks_mut(n * d)
            .enumerate()
            .for_each(|(m, out)| {
                for (i, z_node) in z_nodes.iter().take(n).enumerate() {
                    let z = &z_node[m * d..(m + 1) * d];
                    let q = &mut out[i * d..(i + 1) * d];
                    bang_bang_direction(z, bound, q);
                }
            });
        Self::validated(bound, d, samples, n, values)
    }

    /// A randomly drawn adapted bang-bang control with `|q| = γ` everywhere.
    ///
    /// With probability 1/3 the switching signs are independent coin flips;
    /// otherwise the sign follows `sgn(a W_t + b ΔW_prev + c (t - T/2) + e)`
    /// with coefficients drawn from `seed`.
    pub fn random_bang_bang(paths: &PathEnsemble<S>, bound: S, seed: u64) -> Result<Self> {
        check_bound(bound)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = paths.dim();
        let mut direction: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        direction.iter_mut().for_each(|x| *x /= len);
        let direction: Vec<S> = direction.into_iter().map(S::lit).collect();
        let coin_flips = rng.random_range(0..3) == 0;
        let coeffs: [f64; 4] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng),
        ];
        let [a, b, c, e] = coeffs.map(S::lit);
        let half_t = paths.grid().horizon() / S::lit(2.0);
        if coin_flips {
            let (n, samples) = (paths.steps(), paths.samples());
            let mut values = vec![S::zero(); samples * n * d];
            values
                .par_chunks_mut(n * d)
                .enumerate()
                .for_each(|(m, out)| {
                    let mut flips = ChaCha8Rng::seed_from_u64(seed);
                    flips.set_stream(m as u64 + 1);
                    for q in out.chunks_mut(d) {
                        let s = if flips.random::<bool>() { S::one() } else { -S::one() };
                        for (qk, &uk) in q.iter_mut().zip(&direction) {
                            *qk = bound * s * uk;
                        }
                    }
                });
            return Self::validated(bound, d, samples, n, values);
        }
        Self::from_rule(paths, bound, |view, i| {
            let w = view.current();
            let last = if i > 0 { view.increment(i - 1)[0] } else { S::zero() };
            let t = view.grid().time(i);
            let s = (a * w[0] + b * last + c * (t - half_t) + e).sign_plus();
            direction.iter().map(|&u| bound * s * u).collect()
        })
    }

    pub fn bound(&self) -> S {
        self.bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn at(&self, m: usize, i: usize) -> &[S] {
        let start = (m * self.steps + i) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// All steps of sample `m`.
    pub fn path_values(&self, m: usize) -> &[S] {
        let per = self.steps * self.dim;
        &self.values[m * per..(m + 1) * per]
    }

    pub(crate) fn check_against(&self, paths: &PathEnsemble<S>) -> Result<()> {
        if self.samples != paths.samples() || self.steps != paths.steps() || self.dim != paths.dim() {
            return Err(LabError::EnsembleMismatch(format!(
                "control shape ({} samples, {} steps, d={}) vs paths ({}, {}, d={})",
                self.samples,
                self.steps,
                self.dim,
                paths.samples(),
                paths.steps(),
                paths.dim()
            )));
        }
        let slack = self.bound * (S::one() + S::lit(1e-12));
        if let Some((idx, q)) = self
            .values
            .chunks(self.dim)
            .enumerate()
            .find(|(_, q)| !(norm(q) <= slack))
        {
            return Err(LabError::ControlBound {
                sample: idx / self.steps,
                node: idx % self.steps,
                norm: norm(q).as_f64(),
                bound: self.bound.as_f64(),
            });
        }
        Ok(())
    }
}

/// Writes `γ z / |z|` into `out`; a zero `z` maps to `γ e_1`.
pub(crate) fn bang_bang_direction<S: Scalar>(z: &[S], bound: S, out: &mut [S]) {
    if z.len() == 1 {
        out[0] = bound * z[0].sign_plus();
        return;
    }
    let len = norm(z);
    if len > S::zero() {
        for (o, &zk) in out.iter_mut().zip(z) {
            *o = bound * zk / len;
        }
    } else {
        out.iter_mut().for_each(|o| *o = S::zero());
        out[0] = bound;
    }
}
