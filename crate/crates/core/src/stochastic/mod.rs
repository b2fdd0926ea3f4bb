//! Time grids, seeded Brownian ensembles, stochastic integrals and Girsanov
//! densities for bounded adapted controls.

mod control;
mod girsanov;
mod grid;
mod paths;

pub use control::ControlProcess;
pub use girsanov::{
    girsanov_weights, stochastic_integral, stochastic_integral_from, weighted_expectation,
    GirsanovWeights,
};
pub use grid::TimeGrid;
pub use paths::{PathEnsemble, PathView, DEFAULT_CHUNK};
