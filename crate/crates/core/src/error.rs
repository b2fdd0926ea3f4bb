use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sufficiency condition violated: lambda * gamma^2 * (T - t) = {product} >= 1")]
    SufficiencyViolated { product: f64 },

    #[error("control bound violated at sample {sample}, node {node}: |q| = {norm} > {bound}")]
    ControlBound {
        sample: usize,
        node: usize,
        norm: f64,
        bound: f64,
    },

    #[error("ensemble mismatch: {0}")]
    EnsembleMismatch(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("oracle not applicable: {0}")]
    OracleInvalid(String),

    #[error("fixed-point iteration did not converge at node {node} (sample {sample})")]
    NonConvergence { node: usize, sample: usize },

    #[error("integrand could not be evaluated at x = {x}")]
    Evaluation { x: f64 },

    #[error("terminal value is not integrable: {0}")]
    NotIntegrable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    /// Errors caused by bad input, as opposed to failures of a numerical method.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LabError::InvalidParameter(_)
                | LabError::SufficiencyViolated { .. }
                | LabError::ControlBound { .. }
                | LabError::EnsembleMismatch(_)
                | LabError::EmptyEnsemble
                | LabError::OracleInvalid(_)
                | LabError::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidParameter(msg.into()))
}
