//! The core abstract machine and the core type checker.

mod machine;
mod typeck;

pub use machine::{
    handled, next, projfvs, run, run_observed, step, Configuration, Mark, Outcome, Rule, RunResult, ScopeDiagnostic,
    StepResult, Stuck, TraceRecord,
};
pub use typeck::{check_core, typecheck_core, typecheck_nf, CoreContext, CoreTypeError};

/// Default step budget for a run.
pub const DEFAULT_FUEL: usize = 1_000_000;
