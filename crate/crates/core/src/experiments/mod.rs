//! Experiment configuration, dispatch and deterministic CSV/JSON output.

mod config;
mod run;
mod table;

pub use config::{
    BasisConfig, ExperimentConfig, ExperimentKind, LadderConfig, OutputFormat, SweepConfig, TerminalConfig,
};
pub use run::{counterexample_mean, run};
pub use table::{format_real, Assertion, Cell, Metadata, ResultTable};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BSDE_LAB_OUT";

use crate::error::LabError;

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_ASSERTION: u8 = 4;

/// Process exit status for a failed experiment.
pub fn exit_code(e: &LabError) -> u8 {
    match e {
        LabError::Io { .. } => EXIT_IO,
        e if e.is_validation() => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}
