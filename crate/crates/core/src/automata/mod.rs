//! Timed automata for rule controllers, behaviour-diagram compilation and
//! zone-based safety checking.

mod assumptions;
mod check;
pub mod dbm;
mod diagram;
mod file;
mod model;
mod property;

use thiserror::Error;

use crate::lex::ParseError;

pub use assumptions::{export_assumptions, Assumption, AssumptionSource};
pub use check::{concretize, reachability, replay, ConcreteRun, ConcreteStep, Verdict, Witness, WitnessStep};
pub use dbm::{DbmConstraint, DbmError, Zone};
pub use diagram::{compile_diagram, DiagramBranch, DiagramStep, RuleDiagram};
pub use file::{load_property, parse_controller, ControllerFile, PropertyFile, SensingSpec};
pub use model::{
    dbm_constraints, literals_hold, parse_clock_constraints, parse_literals, ClockConstraint, Edge,
    Location, ObsLiteral, StepInfo, TimedAutomaton, Valuation, MAX_OBSERVATIONS,
};
pub use property::{parse_state_expr, EnvAssumption, Environment, Restriction, SafetyProperty, StateExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomataError {
    #[error("invalid automaton: {0}")]
    Invalid(String),
    #[error("invalid diagram: {0}")]
    Diagram(String),
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("undeclared {kind} '{name}'")]
    UndeclaredSymbol { kind: &'static str, name: String },
    #[error(transparent)]
    Dbm(#[from] DbmError),
    #[error("malformed file: {0}")]
    File(String),
    #[error("witness does not replay: {0}")]
    Replay(String),
}

impl AutomataError {
    pub(crate) fn parse(context: impl Into<String>, source: ParseError) -> AutomataError {
        AutomataError::Parse {
            context: context.into(),
            source,
        }
    }
}
