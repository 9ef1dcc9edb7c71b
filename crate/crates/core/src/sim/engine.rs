use std::collections::BTreeMap;

use crate::assertions::{eval_point, parse_predicate, Pred, StepContext};
use crate::automata::{literals_hold, SensingSpec, TimedAutomaton, Valuation};
use crate::traffic::{Agent, Snapshot, WorldConfig};

use super::scenario::Scenario;
use super::trace::{quantize, AgentInfo, AgentRecord, ObservationMode, Trace, TraceHeader, TraceStep};
use super::SimError;

/// Command labels understood by the action table. A location without an
/// action holds its speed.
pub const KNOWN_ACTIONS: [&str; 5] = ["cruise", "hold", "decelerate", "stop", "proceed"];

/// Ego acceleration commanded by `action` at speed `v`.
pub fn action_accel(action: Option<&str>, v: f64, dt: f64, w: &WorldConfig) -> f64 {
    match action {
        Some("decelerate") if v > 0.0 => -w.b_max,
        Some("stop") if v > 0.0 => -v / dt,
        Some("proceed") if v < w.cruise_speed => w.a_max,
        _ => 0.0,
    }
}

/// Parsed sensing predicates, one per recorded observation.
#[derive(Debug, Clone)]
pub struct Sensing {
    pub ego: Option<String>,
    pub sensors: Vec<(String, Pred)>,
}

impl Sensing {
    pub fn parse(spec: &SensingSpec) -> Result<Sensing, SimError> {
        let mut sensors = Vec::new();
        for (name, text) in &spec.observations {
            let pred = parse_predicate(text).map_err(|e| SimError::Sensing {
                observation: name.clone(),
                message: e.to_string(),
            })?;
            if !pred.is_pointwise() {
                return Err(SimError::Sensing {
                    observation: name.clone(),
                    message: "once(..) and prev(..) are not available while sensing".into(),
                });
            }
            sensors.push((name.clone(), pred));
        }
        Ok(Sensing {
            ego: spec.ego.clone(),
            sensors,
        })
    }

    /// Adds or replaces sensors from `other`.
    pub fn merge(&mut self, other: Sensing) {
        for (name, pred) in other.sensors {
            match self.sensors.iter_mut().find(|(n, _)| *n == name) {
                Some(slot) => slot.1 = pred,
                None => self.sensors.push((name, pred)),
            }
        }
        self.sensors.sort_by(|a, b| a.0.cmp(&b.0));
        if other.ego.is_some() {
            self.ego = other.ego;
        }
    }
}

enum Source<'a> {
    Computed(&'a Sensing),
    Scripted(&'a [Valuation]),
}

fn check_actions(ta: &TimedAutomaton) -> Result<(), SimError> {
    for l in &ta.locations {
        if let Some(a) = &l.action {
            if !KNOWN_ACTIONS.contains(&a.as_str()) {
                return Err(SimError::Controller(format!(
                    "location '{}' has action '{a}', expected one of {}",
                    l.name,
                    KNOWN_ACTIONS.join(", ")
                )));
            }
        }
    }
    Ok(())
}

fn dt_ticks(scenario: &Scenario, ta: &TimedAutomaton) -> Result<i64, SimError> {
    let t = scenario.sim.dt / ta.time_unit;
    let r = t.round();
    if (t - r).abs() > 1e-6 || r < 1.0 {
        return Err(SimError::Controller(format!(
            "dt {} s is not a whole number of {} s clock ticks",
            scenario.sim.dt, ta.time_unit
        )));
    }
    Ok(r as i64)
}

/// Runs the scenario with observations computed from `sensing`.
pub fn run(
    scenario: &Scenario,
    ta: &TimedAutomaton,
    sensing: &Sensing,
    scenario_digest: &str,
    controller_digest: &str,
) -> Result<Trace, SimError> {
    for o in &ta.observations {
        if !sensing.sensors.iter().any(|(n, _)| n == o) {
            return Err(SimError::UnboundObservation(o.clone()));
        }
    }
    simulate(scenario, ta, Source::Computed(sensing), sensing.ego.clone(), scenario_digest, controller_digest)
}

/// Runs the scenario with the controller's observations replayed from
/// `script` (one valuation per step; the last one is held).
pub fn run_scripted(
    scenario: &Scenario,
    ta: &TimedAutomaton,
    script: &[Valuation],
    scenario_digest: &str,
    controller_digest: &str,
) -> Result<Trace, SimError> {
    if script.is_empty() {
        return Err(SimError::Controller("empty observation script".into()));
    }
    simulate(scenario, ta, Source::Scripted(script), None, scenario_digest, controller_digest)
}

fn simulate(
    scenario: &Scenario,
    ta: &TimedAutomaton,
    source: Source,
    ego_override: Option<String>,
    scenario_digest: &str,
    controller_digest: &str,
) -> Result<Trace, SimError> {
    scenario.validate()?;
    ta.validate().map_err(|e| SimError::Controller(e.to_string()))?;
    check_actions(ta)?;
    let q = dt_ticks(scenario, ta)?;
    let dt = scenario.sim.dt;
    let world = scenario.world;
    let ego = scenario.sim.ego.clone();
    let sense_ego = ego_override.unwrap_or_else(|| ego.clone());
    let n = scenario.step_count();
    let len = scenario.network.lane_length;

    let header = TraceHeader {
        scenario_digest: scenario_digest.to_string(),
        controller_digest: controller_digest.to_string(),
        ego: ego.clone(),
        network: scenario.network.clone(),
        world,
        agents: scenario
            .agents
            .iter()
            .map(|a| AgentInfo {
                id: a.id.clone(),
                size: a.size,
                kind: a.kind,
            })
            .collect(),
        dt,
        seed: scenario.sim.seed,
        observations: match source {
            Source::Computed(_) => ObservationMode::Computed,
            Source::Scripted(_) => ObservationMode::Scripted,
        },
    };

    let mut agents: Vec<Agent> = scenario.agents.clone();
    for a in &mut agents {
        a.pos = quantize(a.pos);
        a.speed = quantize(a.speed);
        a.accel = if a.id == ego { 0.0 } else { quantize(a.accel) };
    }
    let mut applied = vec![false; scenario.events.len()];
    let mut loc = ta.initial;
    let mut clocks = vec![0i64; ta.clocks.len()];
    let inv_ok = |l: usize, c: &[i64]| ta.locations[l].invariant.iter().all(|g| g.holds_scaled(c, 1));
    if !inv_ok(loc, &clocks) {
        return Err(SimError::Step {
            step: 0,
            message: format!("initial location '{}' violates its invariant", ta.locations[loc].name),
        });
    }
    let mut entered = 0.0;
    let mut steps = Vec::with_capacity(n);

    for k in 0..n {
        let time = quantize(k as f64 * dt);
        for (i, e) in scenario.events.iter().enumerate() {
            if applied[i] || e.at > time + 1e-9 {
                continue;
            }
            applied[i] = true;
            if e.remove {
                agents.retain(|a| a.id != e.agent);
                continue;
            }
            if let Some(a) = agents.iter_mut().find(|a| a.id == e.agent) {
                if let Some(v) = e.speed {
                    a.speed = quantize(v);
                }
                if let Some(acc) = e.accel {
                    a.accel = quantize(acc);
                }
                if let Some(s) = e.turn_signal {
                    a.turn_signal = s;
                }
            }
        }
        let step_err = |message: String| SimError::Step { step: k, message };

        let (obs_map, valuation) = match &source {
            Source::Computed(sensing) => {
                let needs_snap = sensing.sensors.iter().any(|(_, p)| p.needs_snapshot());
                let snap = if needs_snap {
                    Some(Snapshot::new(scenario.network.clone(), agents.clone(), time, world).map_err(|e| step_err(e.to_string()))?)
                } else {
                    None
                };
                let empty = BTreeMap::new();
                let ctx = StepContext {
                    step: k,
                    time,
                    agents: &agents,
                    network: &scenario.network,
                    observations: &empty,
                    location: &ta.locations[loc].name,
                    loc_time: quantize(time - entered),
                    ego: &sense_ego,
                    snapshot: snap.as_ref(),
                };
                let mut m = BTreeMap::new();
                for (name, pred) in &sensing.sensors {
                    let v = eval_point(pred, &ctx).map_err(|e| step_err(format!("observation '{name}': {e}")))?;
                    m.insert(name.clone(), v);
                }
                let mut val: Valuation = 0;
                for (i, o) in ta.observations.iter().enumerate() {
                    if m[o] {
                        val |= 1 << i;
                    }
                }
                (m, val)
            }
            Source::Scripted(script) => {
                let val = script[k.min(script.len() - 1)];
                let m = ta
                    .observations
                    .iter()
                    .enumerate()
                    .map(|(i, o)| (o.clone(), (val >> i) & 1 == 1))
                    .collect();
                (m, val)
            }
        };

        let location_name = ta.locations[loc].name.clone();
        // at most one edge per step, first enabled in declaration order
        let mut next_loc = loc;
        let mut next_clocks = clocks.clone();
        for (_, e) in ta.edges_from(loc) {
            if !literals_hold(&e.observe, valuation) || !e.guard.iter().all(|g| g.holds_scaled(&clocks, 1)) {
                continue;
            }
            let mut c = clocks.clone();
            for &r in &e.resets {
                c[r] = 0;
            }
            if inv_ok(e.target, &c) {
                next_loc = e.target;
                next_clocks = c;
                break;
            }
        }
        let action = ta.locations[next_loc].action.as_deref();
        if let Some(e) = agents.iter_mut().find(|a| a.id == ego) {
            e.accel = quantize(action_accel(action, e.speed, dt, &world));
        }
        steps.push(TraceStep {
            step: k,
            time,
            agents: agents
                .iter()
                .map(|a| AgentRecord {
                    id: a.id.clone(),
                    lane: a.lane.clone(),
                    pos: a.pos,
                    speed: a.speed,
                    accel: a.accel,
                    turn_signal: a.turn_signal,
                    aut: a.aut,
                })
                .collect(),
            observations: obs_map,
            location: location_name,
            command: action.unwrap_or("hold").to_string(),
        });
        if k + 1 == n {
            break;
        }

        for a in &mut agents {
            let mut v = a.speed + a.accel * dt;
            if a.id == ego && action == Some("proceed") {
                v = v.min(world.cruise_speed.max(a.speed));
            }
            a.pos = quantize(a.pos + a.speed * dt);
            a.speed = quantize(v.clamp(0.0, world.v_max));
            if a.id == ego {
                a.pos = a.pos.min(len);
            }
        }
        agents.retain(|a| a.id == ego || a.pos <= len);
        for c in &mut next_clocks {
            *c += q;
        }
        if next_loc != loc {
            entered = quantize((k + 1) as f64 * dt);
        }
        if !inv_ok(next_loc, &next_clocks) {
            return Err(SimError::Step {
                step: k + 1,
                message: format!(
                    "controller is time-locked in '{}': no edge was enabled before its invariant expired",
                    ta.locations[next_loc].name
                ),
            });
        }
        loc = next_loc;
        clocks = next_clocks;
    }
    Ok(Trace { header, steps })
}
