//! Cross-checking formal verdicts with simulation campaigns.
//!
//! A [`PropertyBinding`] ties a controller, its safety property and a
//! binding file together. From it come derived trace assertions, boundary
//! scenarios around the exported assumptions, and finally a
//! [`CorroborationReport`] pairing the model-checking verdict with the
//! per-trial simulation verdicts.

mod binding;
mod campaign;
mod conflict;
mod report;
mod run;

use thiserror::Error;

pub use binding::{derive_assertions, Axis, Binding, Demand, DemandClass, PropertyBinding};
pub use campaign::{generate_boundary_scenarios, Campaign, CampaignAxis, GeneratedScenario, Strategy};
pub use conflict::{detect_conflicts, ConflictFinding};
pub use report::render_report;
pub use run::{
    run_campaign, run_trial, write_outputs, AssertionOutcome, CampaignMeta, CampaignOutput, CorroborationReport,
    Divergence, FormalEvidence, Status, TrialResult, TrialVerdict, WitnessEvidence,
};

#[derive(Debug, Error)]
pub enum CorroborationError {
    #[error("binding: {0}")]
    Binding(String),
    #[error("observation '{0}' is not bound to a trace predicate")]
    Unbound(String),
    #[error("campaign: {0}")]
    Campaign(String),
    #[error("trial {trial}: {message}")]
    Trial { trial: String, message: String },
    #[error("nothing to report: the campaign has no trials")]
    EmptyReport,
    #[error(transparent)]
    Automata(#[from] crate::automata::AutomataError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
