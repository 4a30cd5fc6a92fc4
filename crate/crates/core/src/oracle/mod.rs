//! Reference integrator and fault-injecting stand-in model.

mod fault;
mod reference;

pub use fault::{faulty_integrate, nonterminating_stream, FaultKind, FaultSpec};
pub use reference::{classify, integrate_reference, Family};
