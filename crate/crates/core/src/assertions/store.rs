use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::sim::Trace;
use crate::traffic::{Agent, AgentKind, Snapshot};

use super::eval::{eval_point, term_value, StepContext};
use super::predicate::{Pred, Term};
use super::AssertionError;

/// Read-only, column-oriented view of a trace for assertion queries.
pub struct TraceStore {
    trace: Trace,
    agents: Vec<Vec<Agent>>,
    loc_time: Vec<f64>,
    /// Cumulative ego travel distance.
    arc: Vec<f64>,
    snapshots: Vec<OnceLock<Result<Snapshot, String>>>,
}

impl TraceStore {
    pub fn new(trace: Trace) -> TraceStore {
        let agents: Vec<Vec<Agent>> = trace
            .steps
            .iter()
            .map(|s| {
                s.agents
                    .iter()
                    .map(|r| {
                        let info = trace.agent_info(&r.id);
                        Agent {
                            id: r.id.clone(),
                            lane: r.lane.clone(),
                            pos: r.pos,
                            speed: r.speed,
                            accel: r.accel,
                            size: info.map_or(0.0, |i| i.size),
                            aut: r.aut,
                            turn_signal: r.turn_signal,
                            kind: info.map_or(AgentKind::Car, |i| i.kind),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut loc_time = Vec::with_capacity(trace.steps.len());
        let mut entered = 0.0;
        for (k, s) in trace.steps.iter().enumerate() {
            if k == 0 || s.location != trace.steps[k - 1].location {
                entered = s.time;
            }
            loc_time.push(s.time - entered);
        }
        let ego = &trace.header.ego;
        let mut arc = Vec::with_capacity(trace.steps.len());
        let mut last: Option<f64> = None;
        let mut total = 0.0;
        for s in &trace.steps {
            if let Some(r) = s.agents.iter().find(|r| r.id == *ego) {
                if let Some(p) = last {
                    total += (r.pos - p).abs();
                }
                last = Some(r.pos);
            }
            arc.push(total);
        }
        let snapshots = (0..trace.steps.len()).map(|_| OnceLock::new()).collect();
        TraceStore {
            trace,
            agents,
            loc_time,
            arc,
            snapshots,
        }
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn len(&self) -> usize {
        self.trace.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.steps.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.trace.steps[k].time
    }

    /// Ego travel distance from the start of the trace to step `k`.
    pub fn arc_length(&self, k: usize) -> f64 {
        self.arc[k]
    }

    fn snapshot(&self, k: usize) -> Result<&Snapshot, String> {
        self.snapshots[k]
            .get_or_init(|| self.trace.snapshot(k).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn context(&self, k: usize, with_snapshot: bool) -> Result<StepContext<'_>, AssertionError> {
        let s = &self.trace.steps[k];
        let snapshot = if with_snapshot {
            Some(self.snapshot(k).map_err(|message| AssertionError::Eval { step: k, message })?)
        } else {
            None
        };
        Ok(StepContext {
            step: s.step,
            time: s.time,
            agents: &self.agents[k],
            network: &self.trace.header.network,
            observations: &s.observations,
            location: &s.location,
            loc_time: self.loc_time[k],
            ego: &self.trace.header.ego,
            snapshot,
        })
    }

    /// Rejects predicates that mention agents or observations the trace
    /// does not record.
    pub fn validate(&self, p: &Pred) -> Result<(), AssertionError> {
        for a in p.agents() {
            if self.trace.agent_info(&a).is_none() {
                return Err(AssertionError::Schema(format!("unknown agent '{a}'")));
            }
        }
        if let Some(first) = self.trace.steps.first() {
            for o in p.observations() {
                if !first.observations.contains_key(&o) {
                    return Err(AssertionError::Schema(format!("observation '{o}' is not recorded")));
                }
            }
        }
        Ok(())
    }

    /// Truth value of `p` at every step.
    pub fn column(&self, p: &Pred) -> Result<Vec<bool>, AssertionError> {
        let n = self.len();
        Ok(match p {
            Pred::Once(a) => {
                let mut c = self.column(a)?;
                for k in 1..n {
                    c[k] |= c[k - 1];
                }
                c
            }
            Pred::Prev(a) => {
                let c = self.column(a)?;
                let mut out = vec![false; n];
                if n > 1 {
                    out[1..].copy_from_slice(&c[..n - 1]);
                }
                out
            }
            Pred::Not(a) => self.column(a)?.into_iter().map(|x| !x).collect(),
            Pred::And(a, b) if !p.is_pointwise() => {
                let (x, y) = (self.column(a)?, self.column(b)?);
                x.iter().zip(&y).map(|(a, b)| *a && *b).collect()
            }
            Pred::Or(a, b) if !p.is_pointwise() => {
                let (x, y) = (self.column(a)?, self.column(b)?);
                x.iter().zip(&y).map(|(a, b)| *a || *b).collect()
            }
            _ => {
                let snap = p.needs_snapshot();
                (0..n)
                    .map(|k| {
                        let ctx = self.context(k, snap)?;
                        eval_point(p, &ctx).map_err(|message| AssertionError::Eval { step: k, message })
                    })
                    .collect::<Result<_, _>>()?
            }
        })
    }

    pub fn term_at(&self, t: &Term, k: usize) -> Option<f64> {
        let ctx = self.context(k, false).ok()?;
        term_value(t, &ctx)
    }

    /// CSV export: one row per step, one column group per agent.
    pub fn to_csv(&self) -> String {
        let mut obs: Vec<&String> = Vec::new();
        for s in &self.trace.steps {
            for o in s.observations.keys() {
                if !obs.contains(&o) {
                    obs.push(o);
                }
            }
        }
        obs.sort();
        let ids: Vec<&str> = self.trace.header.agents.iter().map(|a| a.id.as_str()).collect();
        let mut out = String::from("step,time,location,command");
        for o in &obs {
            let _ = write!(out, ",obs_{o}");
        }
        for id in &ids {
            let _ = write!(out, ",{id}_lane,{id}_pos,{id}_speed,{id}_accel,{id}_turn_signal,{id}_aut");
        }
        out.push('\n');
        for s in &self.trace.steps {
            let _ = write!(out, "{},{},{},{}", s.step, s.time, s.location, s.command);
            for o in &obs {
                let v = s.observations.get(*o).map_or(String::new(), |b| b.to_string());
                let _ = write!(out, ",{v}");
            }
            for id in &ids {
                match s.agents.iter().find(|r| r.id == *id) {
                    Some(r) => {
                        let _ = write!(
                            out,
                            ",{},{},{},{},{},{}",
                            r.lane,
                            r.pos,
                            r.speed,
                            r.accel,
                            r.turn_signal.as_str(),
                            r.aut
                        );
                    }
                    None => out.push_str(",,,,,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}
