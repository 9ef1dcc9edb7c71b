use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::traffic::{Agent, AgentKind, RoadNetwork, Snapshot, TrafficError, TurnSignal, WorldConfig};

use super::SimError;

/// Rounds to 9 significant digits, the precision of every float in a trace.
pub fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Observations evaluated from sensing predicates.
    Computed,
    /// Observations replayed from a script.
    Scripted,
}

/// Static per-agent data, listed once in the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: String,
    pub size: f64,
    pub kind: AgentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario_digest: String,
    pub controller_digest: String,
    pub ego: String,
    pub network: RoadNetwork,
    pub world: WorldConfig,
    pub agents: Vec<AgentInfo>,
    pub dt: f64,
    pub seed: u64,
    pub observations: ObservationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: String,
    pub lane: String,
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
    pub turn_signal: TurnSignal,
    pub aut: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub time: f64,
    /// One record per live agent.
    pub agents: Vec<AgentRecord>,
    pub observations: BTreeMap<String, bool>,
    /// Controller location at this step.
    pub location: String,
    /// Longitudinal command applied from this step to the next.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RecordOut<'a> {
    Header(&'a TraceHeader),
    Step(&'a TraceStep),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RecordIn {
    Header(TraceHeader),
    Step(TraceStep),
}

impl Trace {
    /// Newline-delimited JSON: the header record, then one record per step.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let line = |r: RecordOut| serde_json::to_string(&r).expect("trace records serialize");
        out.push_str(&line(RecordOut::Header(&self.header)));
        out.push('\n');
        for s in &self.steps {
            out.push_str(&line(RecordOut::Step(s)));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, SimError> {
        let mut header = None;
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordIn = serde_json::from_str(line).map_err(|e| SimError::Trace {
                line: i + 1,
                message: e.to_string(),
            })?;
            match rec {
                RecordIn::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                RecordIn::Header(_) => {
                    return Err(SimError::Trace {
                        line: i + 1,
                        message: "unexpected header record".into(),
                    })
                }
                RecordIn::Step(s) => {
                    if s.step != steps.len() {
                        return Err(SimError::Trace {
                            line: i + 1,
                            message: format!("expected step {}, found {}", steps.len(), s.step),
                        });
                    }
                    steps.push(s)
                }
            }
        }
        let header = header.ok_or(SimError::Trace {
            line: 1,
            message: "missing header record".into(),
        })?;
        Ok(Trace { header, steps })
    }

    pub fn agent_info(&self, id: &str) -> Option<&AgentInfo> {
        self.header.agents.iter().find(|a| a.id == id)
    }

    /// Rebuilds the world at step `k` from the recorded agent states.
    pub fn snapshot(&self, k: usize) -> Result<Snapshot, TrafficError> {
        let s = &self.steps[k];
        let agents = s
            .agents
            .iter()
            .map(|r| {
                let info = self.agent_info(&r.id);
                Agent {
                    id: r.id.clone(),
                    lane: r.lane.clone(),
                    pos: r.pos,
                    speed: r.speed,
                    accel: r.accel,
                    size: info.map_or(f64::NAN, |i| i.size),
                    aut: r.aut,
                    turn_signal: r.turn_signal,
                    kind: info.map_or(AgentKind::Car, |i| i.kind),
                }
            })
            .collect();
        Snapshot::new(self.header.network.clone(), agents, s.time, self.header.world)
    }
}
