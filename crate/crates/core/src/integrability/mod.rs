//! Orlicz-type integrability functionals, Gaussian quadrature with divergence
//! detection, and integrability reports for terminal values.

mod functions;
mod quadrature;
mod report;
mod terminal;

pub use functions::{
    ln_psi, phi, phi_of_exp, psi, remark_sandwich, young_gap, young_relative_gap, Sandwich,
};
pub use quadrature::{
    gauss_expectation, integrate, GaussIntegrand, GaussOptions, GaussOutcome, QuadratureResult,
    TruncationEvidence,
};
pub use report::{
    integrability_report, monte_carlo_report, quadrature_report, EntryOutcome, Functional,
    IntegrabilityReport, Method, ReportEntry, ReportRequest, UNSTABLE_TOP_SHARE,
};
pub use terminal::{catalog, TerminalKind, TerminalValue};
