//! Static bug finding for small imperative loop programs.
//!
//! Instead of unwinding loops, the solver looks for a compact proof object:
//! either a safety invariant S showing every exit satisfies the assertion, or
//! a danger invariant (D, R, N, x0) whose ranking function R and skolem
//! functions N pin down a terminating run from x0 that ends in an assertion
//! violation. Both proof kinds are validated exhaustively over the finite
//! two's-complement state space, so a returned certificate is never taken on
//! faith.
//!
//! The crate also ships the baselines the certificates are measured against:
//! an explicit-state bounded model checker whose counterexamples dualize into
//! danger certificates, an exact table-based decision procedure for tiny
//! state spaces, and a forward interval analysis.

pub mod absint;
pub mod ast;
pub mod bmc;
pub mod certfile;
pub mod certificate;
pub mod desugar;
pub mod expr;
pub mod gen;
pub mod lexer;
pub mod mutate;
pub mod parser;
pub mod synth;
pub mod system;

pub use certificate::{
    check_danger, check_safety, extract_trace, CheckOptions, DangerCertificate, SafetyCertificate,
    SafetyMode, Verdict,
};
pub use desugar::desugar;
pub use parser::parse;
pub use system::{enumerate_states, run, step, LoopSystem, State, Trace, TraceStatus};
