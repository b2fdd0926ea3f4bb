//! Least-squares Monte Carlo for the backward equation, closed-form oracles,
//! comparison checks and solution norms.

mod basis;
mod solver;

pub use basis::{
    conditional_expectation, least_squares, BasisFamily, Design, Fit, FitDiagnostics, RegressionBasis,
    RIDGE_PENALTY, RIDGE_TRIGGER,
};
pub use solver::{
    closed_form_oracle, comparison_check, mp_norm, negative_z_fraction, regularity_proxies, solve,
    solve_from_terminal, sp_norm, BsdeSolution, ClosedFormOracle, ComparisonReport, NodeDiagnostics,
    RegularityProxies, SeedLineage, SolverOptions, COMPARISON_ALLOWANCE,
};
