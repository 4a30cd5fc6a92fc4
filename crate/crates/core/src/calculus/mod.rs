//! Differentiation, numeric equivalence and integral verification.

mod diff;
mod equiv;
mod verify;

pub use diff::differentiate;
pub use equiv::{defined_somewhere, numeric_equiv, EquivConfig, EquivError};
pub use verify::{verify_integral, Candidate, Verdict, VerdictStatus};
