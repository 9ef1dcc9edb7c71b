use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::traffic::{Agent, RoadNetwork, TurnSignal, WorldConfig};

use super::SimError;

/// Scripted change to a non-ego agent, applied at the first step whose time
/// is at least `at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub agent: String,
    pub at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_signal: Option<TurnSignal>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub remove: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub ego: String,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: RoadNetwork,
    #[serde(default)]
    pub world: WorldConfig,
    pub agents: Vec<Agent>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub sim: SimSettings,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        self.network.validate().map_err(|e| SimError::Scenario(e.to_string()))?;
        let s = &self.sim;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return bad(format!("sim.dt must be positive, got {}", s.dt));
        }
        if !(s.duration >= s.dt) || !s.duration.is_finite() {
            return bad(format!("sim.duration must be at least sim.dt, got {}", s.duration));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate(&self.network)
                .map_err(|e| SimError::Scenario(format!("agents[{i}]: {e}")))?;
            if self.agents[..i].iter().any(|b| b.id == a.id) {
                return bad(format!("agents[{i}]: duplicate agent '{}'", a.id));
            }
        }
        if !self.agents.iter().any(|a| a.id == s.ego) {
            return bad(format!("sim.ego '{}' is not an agent", s.ego));
        }
        for (i, e) in self.events.iter().enumerate() {
            if !self.agents.iter().any(|a| a.id == e.agent) {
                return bad(format!("events[{i}]: unknown agent '{}'", e.agent));
            }
            if e.agent == s.ego {
                return bad(format!("events[{i}]: the ego is driven by its controller"));
            }
            if !(e.at >= 0.0 && e.at <= s.duration) {
                return bad(format!("events[{i}]: time {} outside [0, {}]", e.at, s.duration));
            }
            if e.speed.is_some_and(|v| !(v >= 0.0)) {
                return bad(format!("events[{i}]: speed must be non-negative"));
            }
        }
        Ok(())
    }

    /// Number of recorded steps: ⌈duration / dt⌉ + 1.
    pub fn step_count(&self) -> usize {
        let n = self.sim.duration / self.sim.dt;
        let r = n.round();
        let whole = if (n - r).abs() < 1e-9 { r } else { n.ceil() };
        whole as usize + 1
    }

    /// Reads a numeric parameter such as `agents.N.pos` or `world.b_max`.
    /// Array elements are addressed by index or by their `id`.
    pub fn get_param(&self, path: &str) -> Result<f64, SimError> {
        let v = serde_json::to_value(self).expect("scenarios serialize");
        locate(&v, path)?
            .as_f64()
            .ok_or_else(|| SimError::Param(format!("'{path}' is not a number")))
    }

    pub fn set_param(&self, path: &str, value: f64) -> Result<Scenario, SimError> {
        let mut v = serde_json::to_value(self).expect("scenarios serialize");
        let slot = locate_mut(&mut v, path)?;
        if !slot.is_number() {
            return Err(SimError::Param(format!("'{path}' is not a number")));
        }
        *slot = serde_json::json!(value);
        let s: Scenario = serde_json::from_value(v).map_err(|e| SimError::Param(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

fn index_of(items: &[Value], seg: &str) -> Option<usize> {
    if let Ok(i) = seg.parse::<usize>() {
        return (i < items.len()).then_some(i);
    }
    items
        .iter()
        .position(|it| it.get("id").and_then(Value::as_str) == Some(seg))
}

fn locate<'a>(v: &'a Value, path: &str) -> Result<&'a Value, SimError> {
    let mut cur = v;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get(seg),
            Value::Array(items) => index_of(items, seg).map(|i| &items[i]),
            _ => None,
        }
        .ok_or_else(|| SimError::Param(format!("parameter path '{path}' does not resolve at '{seg}'")))?;
    }
    Ok(cur)
}

fn locate_mut<'a>(v: &'a mut Value, path: &str) -> Result<&'a mut Value, SimError> {
    let mut cur = v;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(seg),
            Value::Array(items) => match index_of(items, seg) {
                Some(i) => items.get_mut(i),
                None => None,
            },
            _ => None,
        }
        .ok_or_else(|| SimError::Param(format!("parameter path '{path}' does not resolve at '{seg}'")))?;
    }
    Ok(cur)
}
