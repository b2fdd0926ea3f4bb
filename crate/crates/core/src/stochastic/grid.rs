use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Discretization `0 = t_0 < t_1 < ... < t_N = T` of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid<S> {
    horizon: S,
    nodes: Vec<S>,
}

impl<S: Scalar> TimeGrid<S> {
    /// Uniform grid with `steps` intervals of length `horizon / steps`.
    pub fn uniform(horizon: S, steps: usize) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return invalid("a time grid needs at least one step");
        }
        let n = S::from_usize_lossy(steps);
        let mut nodes: Vec<S> = (0..=steps)
            .map(|i| horizon * S::from_usize_lossy(i) / n)
            .collect();
        nodes[steps] = horizon;
        Ok(TimeGrid { horizon, nodes })
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// Number of intervals `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn time(&self, i: usize) -> S {
        self.nodes[i]
    }

    /// `t_{i+1} - t_i`.
    pub fn dt(&self, i: usize) -> S {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// `T - t_i`.
    pub fn remaining(&self, i: usize) -> S {
        self.horizon - self.nodes[i]
    }

    /// Grid with every `factor` consecutive steps merged.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return invalid(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps()
            ));
        }
        Ok(TimeGrid {
            horizon: self.horizon,
            nodes: self.nodes.iter().step_by(factor).copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_grid() {
        let g = TimeGrid::uniform(1.0f64, 1).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0]);
    }

    #[test]
    fn quarter_grid() {
        let g = TimeGrid::uniform(1.0f64, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn hundred_steps_on_two_units() {
        let g = TimeGrid::uniform(2.0f64, 100).unwrap();
        assert_eq!(g.nodes().len(), 101);
        for i in 0..100 {
            assert!((g.dt(i) - 0.02).abs() < 1e-15);
        }
        assert_eq!(g.time(100), 2.0);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(TimeGrid::uniform(0.0f64, 4).is_err());
        assert!(TimeGrid::uniform(-1.0f64, 4).is_err());
        assert!(TimeGrid::uniform(1.0f64, 0).is_err());
        assert!(TimeGrid::uniform(f64::NAN, 3).is_err());
    }

    #[test]
    fn coarsening_keeps_endpoints() {
        let g = TimeGrid::uniform(1.0f64, 100).unwrap().coarsen(4).unwrap();
        assert_eq!(g.steps(), 25);
        assert_eq!(g.time(25), 1.0);
        assert!(TimeGrid::uniform(1.0f64, 10).unwrap().coarsen(3).is_err());
    }
}
