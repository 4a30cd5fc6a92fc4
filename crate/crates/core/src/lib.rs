//! Evaluation toolkit for neural symbolic integrators.
//!
//! The crate provides an expression IR with exact canonicalization, a
//! derivative-based verifier, a rule-based reference integrator with fault
//! injection, the Fail@k family of metrics, problem generators and a
//! genetic search (SAGGA) that discovers failure archives.

pub mod calculus;
pub mod expr;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod problemgen;
pub mod sagga;
pub mod seed;

pub use expr::{
    canonicalize, eval_at, metrics as expr_metrics, parse_infix, parse_prefix, shape_key,
    to_infix, to_prefix, CanonError, DomainError, Expr, ExprMetrics, Func, ParseError, TokenSeq,
};
