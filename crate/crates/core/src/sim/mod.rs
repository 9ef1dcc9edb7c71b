//! Deterministic closed-loop kinematic simulation of a rule controller on
//! a scenario, producing JSONL traces.

mod engine;
mod scenario;
mod trace;

use thiserror::Error;

pub use engine::{action_accel, run, run_scripted, Sensing, KNOWN_ACTIONS};
pub use scenario::{Event, Scenario, SimSettings};
pub use trace::{quantize, AgentInfo, AgentRecord, ObservationMode, Trace, TraceHeader, TraceStep};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("parameter: {0}")]
    Param(String),
    #[error("controller: {0}")]
    Controller(String),
    #[error("controller observation '{0}' is not bound to a sensing predicate")]
    UnboundObservation(String),
    #[error("sensing predicate for '{observation}': {message}")]
    Sensing { observation: String, message: String },
    #[error("step {step}: {message}")]
    Step { step: usize, message: String },
}
