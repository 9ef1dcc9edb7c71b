use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assertions::{check_assertion, check_suite, Assertion, Kind, TraceStore, Verdict};
use crate::automata::{concretize, export_assumptions, literals_hold, reachability, Assumption, Verdict as Formal};
use crate::sim::{run, run_scripted, Scenario, Trace};

use super::binding::{derive_assertions, PropertyBinding};
use super::campaign::{boundary_points, generate_boundary_scenarios, Campaign, CampaignAxis, GeneratedScenario, Strategy};
use super::conflict::{detect_conflicts, ConflictFinding};
use super::report::render_report;
use super::CorroborationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Corroborated,
    Refuted,
    Inconclusive,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Corroborated => "corroborated",
            Status::Refuted => "refuted",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// The two evidence streams disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Divergence {
    /// Unsafe formally, but the witness cannot be played out physically.
    RefutedFormallyUnrealizableInSimulation,
    /// Safe formally, yet a simulated trial violates a derived assertion.
    SimulationContradictsProof,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvidence {
    pub file: String,
    /// Controller locations along the witness.
    pub path: Vec<String>,
    /// The witness could be discretised at the scenario's step length.
    pub concretized: bool,
    /// Sensing on the replayed trace agrees with every edge the witness takes.
    pub realizable: bool,
    pub trace: Option<String>,
    pub trace_digest: Option<String>,
    /// The derived invariant fails on the replayed trace.
    pub invariant_failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalEvidence {
    pub verdict: String,
    pub states: usize,
    pub assumptions: Vec<Assumption>,
    pub witness: Option<WitnessEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub kind: Kind,
    pub verdict: Verdict,
    pub failures: usize,
    pub first_failure_step: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialVerdict {
    Pass,
    Fail,
    Vacuous,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub id: String,
    pub values: BTreeMap<String, f64>,
    pub scenario: String,
    pub scenario_digest: String,
    pub trace: Option<String>,
    pub trace_digest: Option<String>,
    pub verdict: TrialVerdict,
    pub assertions: Vec<AssertionOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub trials_requested: usize,
    pub seed: u64,
    pub workers: usize,
    pub axes: Vec<CampaignAxis>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorroborationReport {
    /// Content address of the inputs.
    pub id: String,
    pub property: String,
    pub controller_digest: String,
    pub scenario_digest: String,
    pub status: Status,
    pub divergence: Option<Divergence>,
    pub formal: FormalEvidence,
    pub assertions: Vec<String>,
    pub trials: Vec<TrialResult>,
    pub conflicts: Vec<ConflictFinding>,
    pub coverage_holes: Vec<String>,
    pub campaign: CampaignMeta,
}

/// Report plus the files it references, keyed by path relative to the
/// output directory.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub report: CorroborationReport,
    pub files: BTreeMap<String, String>,
}

fn trial_verdict(outcomes: &[AssertionOutcome], error: bool) -> TrialVerdict {
    if outcomes.iter().any(|o| o.verdict == Verdict::Fail) {
        TrialVerdict::Fail
    } else if error {
        TrialVerdict::Error
    } else if outcomes.iter().any(|o| o.verdict == Verdict::Vacuous) {
        TrialVerdict::Vacuous
    } else {
        TrialVerdict::Pass
    }
}

/// Simulates one generated scenario and checks `assertions` on the trace.
/// Errors are recorded in the result.
pub fn run_trial(
    pb: &PropertyBinding,
    assertions: &[Assertion],
    gs: &GeneratedScenario,
    controller_digest: &str,
) -> (TrialResult, Option<String>) {
    let text = gs.scenario.to_toml();
    let scenario_digest = crate::digest(text.as_bytes());
    let mut result = TrialResult {
        id: gs.id.clone(),
        values: gs.values.iter().cloned().collect(),
        scenario: format!("scenarios/{}.scn", gs.id),
        scenario_digest: scenario_digest.clone(),
        trace: None,
        trace_digest: None,
        verdict: TrialVerdict::Error,
        assertions: Vec::new(),
        error: None,
    };
    let trace = match run(&gs.scenario, &pb.automaton, &pb.sensing, &scenario_digest, controller_digest) {
        Ok(t) => t,
        Err(e) => {
            result.error = Some(e.to_string());
            return (result, None);
        }
    };
    let jsonl = trace.to_jsonl();
    result.trace = Some(format!("traces/{}.jsonl", gs.id));
    result.trace_digest = Some(crate::digest(jsonl.as_bytes()));
    let suite = check_suite(&TraceStore::new(trace), assertions);
    result.assertions = suite
        .results
        .iter()
        .map(|r| AssertionOutcome {
            name: r.name.clone(),
            kind: r.kind,
            verdict: r.verdict,
            failures: r.failures.len(),
            first_failure_step: r.failures.iter().map(|f| f.step).min(),
        })
        .collect();
    if !suite.errors.is_empty() {
        let msgs: Vec<String> = suite.errors.iter().map(|e| format!("{}: {}", e.assertion, e.message)).collect();
        result.error = Some(msgs.join("; "));
    }
    result.verdict = trial_verdict(&result.assertions, result.error.is_some());
    (result, Some(jsonl))
}

fn replay_witness(
    pb: &PropertyBinding,
    invariant: &Assertion,
    base: &Scenario,
    witness: &crate::automata::Witness,
    controller_digest: &str,
    files: &mut BTreeMap<String, String>,
) -> Result<WitnessEvidence, CorroborationError> {
    let ta = &pb.automaton;
    let env = &pb.property.environment;
    let prop = &pb.property.property;
    let mut path = vec![ta.locations[ta.initial].name.clone()];
    for e in witness.edges() {
        path.push(ta.locations[ta.edges[e].target].name.clone());
    }
    let mut ev = WitnessEvidence {
        file: "witness.json".into(),
        path,
        concretized: false,
        realizable: false,
        trace: None,
        trace_digest: None,
        invariant_failed: false,
        note: None,
    };
    let quantum = (base.sim.dt / ta.time_unit).round() as i64;
    let Some(concrete) = concretize(ta, prop, env, witness, quantum.max(1))? else {
        ev.note = Some("the witness has no run at the simulation step length".into());
        return Ok(ev);
    };
    ev.concretized = true;
    let mut scn = base.clone();
    let needed = concrete.steps.len() as f64 * base.sim.dt;
    if scn.sim.duration < needed {
        scn.sim.duration = needed;
    }
    let script: Vec<_> = concrete.steps.iter().map(|s| s.observations).collect();
    let digest = crate::digest(scn.to_toml().as_bytes());
    let trace = run_scripted(&scn, ta, &script, &digest, controller_digest)?;
    let jsonl = trace.to_jsonl();
    ev.trace = Some("traces/witness.jsonl".into());
    ev.trace_digest = Some(crate::digest(jsonl.as_bytes()));
    files.insert("traces/witness.jsonl".into(), jsonl);
    let store = TraceStore::new(trace);
    ev.realizable = witness_realizable(pb, &store, &concrete.steps)?;
    if !ev.realizable {
        ev.note = Some("sensing on the replayed trace disagrees with an observation the witness relies on".into());
    }
    ev.invariant_failed = check_assertion(&store, invariant)
        .map_err(|e| CorroborationError::Trial {
            trial: "witness".into(),
            message: e.to_string(),
        })?
        .verdict
        == Verdict::Fail;
    Ok(ev)
}

/// Every edge of the concrete run must be enabled by what the sensors
/// would have reported on the replayed world.
fn witness_realizable(
    pb: &PropertyBinding,
    store: &TraceStore,
    steps: &[crate::automata::ConcreteStep],
) -> Result<bool, CorroborationError> {
    let ta = &pb.automaton;
    let mut columns = Vec::new();
    for o in &ta.observations {
        let pred = pb
            .sensing
            .sensors
            .iter()
            .find(|(n, _)| n == o)
            .map(|(_, p)| p)
            .ok_or_else(|| CorroborationError::Unbound(o.clone()))?;
        columns.push(store.column(pred).map_err(|e| CorroborationError::Trial {
            trial: "witness".into(),
            message: e.to_string(),
        })?);
    }
    for (k, s) in steps.iter().enumerate() {
        let Some(e) = s.edge else { continue };
        let mut val = 0u64;
        for (i, c) in columns.iter().enumerate() {
            if c[k] {
                val |= 1 << i;
            }
        }
        if !literals_hold(&ta.edges[e].observe, val) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs the formal check, the witness replay (when Unsafe) and every trial
/// of `campaign`, then aggregates the status.
pub fn run_campaign(
    pb: &PropertyBinding,
    campaign: &Campaign,
    workers: usize,
    controller_digest: &str,
) -> Result<CampaignOutput, CorroborationError> {
    let started = Instant::now();
    let ta = &pb.automaton;
    let prop = &pb.property.property;
    let env = &pb.property.environment;
    let assertions = derive_assertions(pb)?;
    let invariant = assertions[0].clone();
    let scenarios = generate_boundary_scenarios(campaign)?;
    let base_text = campaign.base.to_toml();
    let scenario_digest = crate::digest(base_text.as_bytes());
    let mut files = BTreeMap::new();

    let verdict = reachability(ta, prop, env)?;
    let mut formal = FormalEvidence {
        verdict: if verdict.is_safe() { "safe" } else { "unsafe" }.into(),
        states: match &verdict {
            Formal::Safe { states } | Formal::Unsafe { states, .. } => *states,
        },
        assumptions: export_assumptions(ta, prop, env),
        witness: None,
    };
    if let Some(w) = verdict.witness() {
        files.insert(
            "witness.json".into(),
            serde_json::to_string_pretty(&verdict).expect("witness serializes") + "\n",
        );
        formal.witness = Some(replay_witness(pb, &invariant, &campaign.base, w, controller_digest, &mut files)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CorroborationError::Campaign(e.to_string()))?;
    let outcomes: Vec<(TrialResult, Option<String>)> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|gs| run_trial(pb, &assertions, gs, controller_digest))
            .collect()
    });

    let mut trials = Vec::new();
    let mut stores = Vec::new();
    for (gs, (result, jsonl)) in scenarios.iter().zip(outcomes) {
        files.insert(result.scenario.clone(), gs.scenario.to_toml());
        if let (Some(path), Some(text)) = (&result.trace, jsonl) {
            if let Ok(t) = Trace::from_jsonl(&text) {
                stores.push((result.id.clone(), TraceStore::new(t)));
            }
            files.insert(path.clone(), text);
        }
        trials.push(result);
    }
    let conflicts = detect_conflicts(&[&pb.binding], &stores);

    let mut holes = Vec::new();
    for t in &trials {
        match t.verdict {
            TrialVerdict::Vacuous => {
                let names: Vec<&str> = t
                    .assertions
                    .iter()
                    .filter(|a| a.verdict == Verdict::Vacuous)
                    .map(|a| a.name.as_str())
                    .collect();
                holes.push(format!("{}: vacuous {}", t.id, names.join(", ")));
            }
            TrialVerdict::Error => holes.push(format!(
                "{}: not executed ({})",
                t.id,
                t.error.as_deref().unwrap_or("error")
            )),
            _ => {}
        }
    }
    if campaign.strategy == Strategy::Boundary {
        for (name, points) in boundary_points(&scenarios) {
            for p in points {
                let covered = trials.iter().any(|t| {
                    t.values.get(&name).is_some_and(|v| (v - p).abs() <= 1e-9)
                        && matches!(t.verdict, TrialVerdict::Pass | TrialVerdict::Fail)
                });
                if !covered {
                    holes.push(format!("boundary point {name}={p} has no non-vacuous trial"));
                }
            }
        }
    }

    let any_fail = trials.iter().any(|t| t.verdict == TrialVerdict::Fail);
    let witness_fails = formal
        .witness
        .as_ref()
        .is_some_and(|w| w.realizable && w.invariant_failed);
    let (status, divergence) = if verdict.is_safe() {
        if any_fail {
            (Status::Refuted, Some(Divergence::SimulationContradictsProof))
        } else if holes.is_empty() {
            (Status::Corroborated, None)
        } else {
            (Status::Inconclusive, None)
        }
    } else if any_fail || witness_fails {
        (Status::Refuted, None)
    } else {
        (Status::Inconclusive, Some(Divergence::RefutedFormallyUnrealizableInSimulation))
    };

    let id = crate::digest(format!("{scenario_digest}:{controller_digest}:{}", prop.name).as_bytes());
    let report = CorroborationReport {
        id,
        property: prop.name.clone(),
        controller_digest: controller_digest.to_string(),
        scenario_digest,
        status,
        divergence,
        formal,
        assertions: assertions.iter().map(|a| a.to_string()).collect(),
        trials,
        conflicts,
        coverage_holes: holes,
        campaign: CampaignMeta {
            strategy: campaign.strategy,
            epsilon: campaign.epsilon,
            trials_requested: campaign.trials,
            seed: campaign.seed,
            workers: workers.max(1),
            axes: campaign.axes.clone(),
            runtime_ms: started.elapsed().as_millis() as u64,
        },
    };
    Ok(CampaignOutput { report, files })
}

/// Writes `report.json`, `report.md` and every referenced file under `dir`.
pub fn write_outputs(dir: &Path, out: &CampaignOutput) -> Result<(), CorroborationError> {
    let io = |p: &Path, e: std::io::Error| CorroborationError::Io {
        path: p.display().to_string(),
        source: e,
    };
    let mut all = out.files.clone();
    all.insert("report.json".into(), render_report(&out.report, "json")?);
    all.insert("report.md".into(), render_report(&out.report, "md")?);
    for (rel, text) in &all {
        let p = dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        std::fs::write(&p, text).map_err(|e| io(&p, e))?;
    }
    Ok(())
}
