//! Assertion checking over stored simulation traces: invariants, execution
//! conditions at reference points, and pre-/post-conditions over temporal
//! or physical windows.

mod check;
mod eval;
mod predicate;
mod spec;
mod store;

use thiserror::Error;

pub use check::{
    check_assertion, check_suite, find_reference_points, rising_edges, window_range, AssertionResult, Failure,
    SuiteError, SuiteReport, Summary, Verdict,
};
pub use eval::{eval_point, resolve_view, term_value, StepContext};
pub use predicate::{parse_predicate, AgentRef, Pred, RelOp, Term, ViewSpec};
pub use spec::{parse_assertions, Assertion, Flavor, Kind};
pub use store::TraceStore;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssertionError {
    #[error("assertion '{stanza}' (line {line}): {message}")]
    Syntax {
        stanza: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error("step {step}: {message}")]
    Eval { step: usize, message: String },
}
