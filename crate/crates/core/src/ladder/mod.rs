//! Truncation ladders `ξ⁺∧n − ξ⁻∧p`: monotonicity across rungs, domination
//! by the a priori bound, convergence verdicts, hitting times and the
//! exponential-moment necessity check.

mod necessity;
mod run;
mod schedule;

pub use necessity::{necessity_check, NecessityEntry, NecessityReport};
pub use run::{
    histogram, hitting_times, ladder_verdict, run_ladder, CheckStats, HittingHistogram, LadderOptions,
    LadderReport, RungResult, Verdict, CAUCHY_FLOOR, GROWTH_SE, LADDER_ALLOWANCE,
};
pub use schedule::{truncate_terminal, truncate_value, TruncationSchedule};
