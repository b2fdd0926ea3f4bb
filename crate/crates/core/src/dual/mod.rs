//! Linear-growth generators, the a priori bound process, dual values over
//! finite control families and the exponential-moment bound for controls.

mod bound;
mod generator;
mod value;

pub use bound::{
    apriori_bound, check_sufficiency, conditional_psi_expectation, BoundProcess, ConditionalMethod,
    BOUND_LATTICE, BOUND_REGRESSION_DEGREE,
};
pub use generator::{Alpha, AlphaConfig, CertificateCheck, GeneratorSpec};
pub use value::{
    dual_family_max, dual_value, dual_value_from_samples, phi_moment_check, Candidate, ControlFamily,
    DualValue, FamilyMax, PhiMomentCheck,
};
