use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::grid::TimeGrid;
use crate::error::{invalid, LabError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_CHUNK: usize = 4096;

/// Seeded ensemble of `d`-dimensional Brownian increments on a grid.
///
/// Increments are stored sample-major: `[m][i][k]`. Samples are generated in
/// chunks of `chunk_size`; chunk `c` draws from the ChaCha stream `c` under
/// the ensemble seed, so the first `M` samples of a larger ensemble with the
/// same seed and chunk size coincide with an ensemble of size `M`.
#[derive(Debug, Clone)]
pub struct PathEnsemble<S> {
    grid: TimeGrid<S>,
    dim: usize,
    samples: usize,
    seed: Option<u64>,
    chunk_size: usize,
    increments: Vec<S>,
}

impl<S: Scalar> PathEnsemble<S> {
    pub fn sample(grid: &TimeGrid<S>, dim: usize, samples: usize, seed: u64) -> Result<Self> {
        Self::sample_with_chunks(grid, dim, samples, seed, DEFAULT_CHUNK)
    }

    pub fn sample_with_chunks(
        grid: &TimeGrid<S>,
        dim: usize,
        samples: usize,
        seed: u64,
        chunk_size: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("Brownian dimension must be at least 1");
        }
        if samples == 0 {
            return Err(LabError::EmptyEnsemble);
        }
        if chunk_size == 0 {
            return invalid("chunk size must be positive");
        }
        let steps = grid.steps();
        let per_path = steps * dim;
        let scales: Vec<f64> = (0..steps).map(|i| grid.dt(i).as_f64().sqrt()).collect();
        let mut increments = vec![S::zero(); samples * per_path];
        increments
            .par_chunks_mut(chunk_size * per_path)
            .enumerate()
            .for_each(|(chunk, block)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk as u64);
                for path in block.chunks_mut(per_path) {
                    for (i, step) in path.chunks_mut(dim).enumerate() {
                        for w in step.iter_mut() {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            *w = S::lit(z * scales[i]);
                        }
                    }
                }
            });
        Ok(PathEnsemble {
            grid: grid.clone(),
            dim,
            samples,
            seed: Some(seed),
            chunk_size,
            increments,
        })
    }

    /// Wraps externally supplied increments laid out as `[m][i][k]`.
    pub fn from_increments(grid: &TimeGrid<S>, dim: usize, increments: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return invalid("Brownian dimension must be at least 1");
        }
        let per_path = grid.steps() * dim;
        if increments.is_empty() || !increments.len().is_multiple_of(per_path) {
            return invalid(format!(
                "increment buffer of length {} is not a positive multiple of {per_path}",
                increments.len()
            ));
        }
        Ok(PathEnsemble {
            grid: grid.clone(),
            dim,
            samples: increments.len() / per_path,
            seed: None,
            chunk_size: DEFAULT_CHUNK,
            increments,
        })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    fn per_path(&self) -> usize {
        self.grid.steps() * self.dim
    }

    pub fn increments(&self) -> &[S] {
        &self.increments
    }

    /// `ΔW` of sample `m` over step `i`.
    pub fn increment(&self, m: usize, i: usize) -> &[S] {
        let start = m * self.per_path() + i * self.dim;
        &self.increments[start..start + self.dim]
    }

    pub fn path(&self, m: usize) -> PathView<'_, S> {
        let start = m * self.per_path();
        PathView {
            grid: &self.grid,
            dim: self.dim,
            increments: &self.increments[start..start + self.per_path()],
            visible: self.grid.steps(),
        }
    }

    /// `W_{t_i}` for every sample, laid out `[m][k]`.
    pub fn positions(&self, i: usize) -> Vec<S> {
        let d = self.dim;
        let per_path = self.per_path();
        let mut out = vec![S::zero(); self.samples * d];
        out.par_chunks_mut(d)
            .zip(self.increments.par_chunks(per_path))
            .for_each(|(w, path)| {
                for step in path[..i * d].chunks(d) {
                    for k in 0..d {
                        w[k] = w[k] + step[k];
                    }
                }
            });
        out
    }

    pub fn terminal_positions(&self) -> Vec<S> {
        self.positions(self.grid.steps())
    }

    /// Same paths observed on a grid with `factor` steps merged into one.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let d = self.dim;
        let steps = grid.steps();
        let mut increments = vec![S::zero(); self.samples * steps * d];
        increments
            .par_chunks_mut(steps * d)
            .zip(self.increments.par_chunks(self.per_path()))
            .for_each(|(coarse, fine)| {
                for (j, step) in fine.chunks(d).enumerate() {
                    let target = (j / factor) * d;
                    for k in 0..d {
                        coarse[target + k] = coarse[target + k] + step[k];
                    }
                }
            });
        Ok(PathEnsemble {
            grid,
            dim: d,
            samples: self.samples,
            seed: self.seed,
            chunk_size: self.chunk_size,
            increments,
        })
    }

    /// The first `samples` paths.
    pub fn prefix(&self, samples: usize) -> Result<Self> {
        if samples == 0 || samples > self.samples {
            return invalid(format!(
                "prefix of {samples} samples out of {}",
                self.samples
            ));
        }
        Ok(PathEnsemble {
            grid: self.grid.clone(),
            dim: self.dim,
            samples,
            seed: self.seed,
            chunk_size: self.chunk_size,
            increments: self.increments[..samples * self.per_path()].to_vec(),
        })
    }

    /// True when both ensembles hold the same paths on the same grid.
    pub fn same_paths(&self, other: &Self) -> bool {
        if self.grid != other.grid || self.dim != other.dim || self.samples != other.samples {
            return false;
        }
        match (self.seed, other.seed) {
            (Some(a), Some(b)) if a == b && self.chunk_size == other.chunk_size => true,
            _ => std::ptr::eq(self, other) || self.increments == other.increments,
        }
    }
}

/// Read-only view of one sample path, restricted to the first `visible` steps.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a, S> {
    grid: &'a TimeGrid<S>,
    dim: usize,
    increments: &'a [S],
    visible: usize,
}

impl<'a, S: Scalar> PathView<'a, S> {
    pub fn grid(&self) -> &'a TimeGrid<S> {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Last node whose position is visible.
    pub fn visible_steps(&self) -> usize {
        self.visible
    }

    /// The history up to node `i`; later increments are hidden.
    pub fn up_to(&self, i: usize) -> PathView<'a, S> {
        PathView {
            visible: i.min(self.visible),
            ..*self
        }
    }

    pub fn increment(&self, j: usize) -> &'a [S] {
        assert!(j < self.visible, "increment {j} lies beyond the visible history");
        &self.increments[j * self.dim..(j + 1) * self.dim]
    }

    pub fn position(&self, i: usize) -> Vec<S> {
        assert!(i <= self.visible, "node {i} lies beyond the visible history");
        let mut w = vec![S::zero(); self.dim];
        for step in self.increments[..i * self.dim].chunks(self.dim) {
            for (wk, &dk) in w.iter_mut().zip(step) {
                *wk = *wk + dk;
            }
        }
        w
    }

    /// Position at the last visible node.
    pub fn current(&self) -> Vec<S> {
        self.position(self.visible)
    }

    /// Scalar positions `W_{t_0}, ..., W_{t_visible}` of the first coordinate.
    pub fn first_coordinate(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.visible + 1);
        let mut w = S::zero();
        out.push(w);
        for j in 0..self.visible {
            w = w + self.increments[j * self.dim];
            out.push(w);
        }
        out
    }
}
