//! Numerical laboratory for scalar backward stochastic differential equations
//! `Y_t = ξ + ∫_t^T f(s, Y_s, Z_s) ds − ∫_t^T Z_s dW_s` whose terminal value
//! `ξ` is only slightly better than integrable, with generators of linear
//! growth `|f(t, y, z)| ≤ α_t + β|y| + γ|z|`.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common case.

// `!(x > 0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod experiments;
pub mod integrability;
pub mod ladder;
pub mod lsmc;
pub mod scalar;
pub mod stats;
pub mod stochastic;

pub use error::{LabError, Result};
pub use scalar::Scalar;

pub type TimeGridF64 = stochastic::TimeGrid<f64>;
pub type PathEnsembleF64 = stochastic::PathEnsemble<f64>;
pub type ControlProcessF64 = stochastic::ControlProcess<f64>;
pub type TerminalValueF64 = integrability::TerminalValue<f64>;
pub type GeneratorSpecF64 = dual::GeneratorSpec<f64>;
pub type BoundProcessF64 = dual::BoundProcess<f64>;
pub type BsdeSolutionF64 = lsmc::BsdeSolution<f64>;
pub type LadderReportF64 = ladder::LadderReport<f64>;
pub type EstimateF64 = stats::Estimate<f64>;

pub type TimeGridF32 = stochastic::TimeGrid<f32>;
pub type PathEnsembleF32 = stochastic::PathEnsemble<f32>;
pub type ControlProcessF32 = stochastic::ControlProcess<f32>;
pub type TerminalValueF32 = integrability::TerminalValue<f32>;
pub type GeneratorSpecF32 = dual::GeneratorSpec<f32>;
pub type BoundProcessF32 = dual::BoundProcess<f32>;
pub type BsdeSolutionF32 = lsmc::BsdeSolution<f32>;
pub type LadderReportF32 = ladder::LadderReport<f32>;
pub type EstimateF32 = stats::Estimate<f32>;
