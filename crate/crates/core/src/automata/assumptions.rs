use serde::{Deserialize, Serialize};

use super::model::TimedAutomaton;
use super::property::{Environment, SafetyProperty};
use crate::spatial::Cmp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionSource {
    /// Physical meaning of an observation supplied by the environment.
    Environment,
    /// Restriction on the observation valuations.
    Restriction,
    /// Step duration bound of a behaviour diagram.
    Duration,
    /// Clock bound of a location invariant or the property.
    Clock,
}

/// An axiom the formal verdict rests on, with the range in which it was
/// verified. `lo`/`hi` are inclusive unless the matching `strict` flag is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub name: String,
    pub source: AssumptionSource,
    pub parameter: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default)]
    pub strict: bool,
    pub unit: String,
}

pub fn export_assumptions(ta: &TimedAutomaton, property: &SafetyProperty, env: &Environment) -> Vec<Assumption> {
    let mut out = Vec::new();
    for a in &env.assumptions {
        let (lo, hi) = match a.relation {
            Cmp::Ge | Cmp::Gt => (Some(a.value), None),
            Cmp::Le | Cmp::Lt => (None, Some(a.value)),
            Cmp::Eq => (Some(a.value), Some(a.value)),
        };
        out.push(Assumption {
            name: a.name.clone(),
            source: AssumptionSource::Environment,
            parameter: a.observation.clone(),
            lo,
            hi,
            strict: matches!(a.relation, Cmp::Gt | Cmp::Lt),
            unit: "m".into(),
        });
    }
    for r in &env.restrictions {
        let scope = r.location.map_or("all", |l| ta.locations[l].name.as_str());
        out.push(Assumption {
            name: format!("restrict_{scope}"),
            source: AssumptionSource::Restriction,
            parameter: r.text.clone(),
            lo: None,
            hi: None,
            strict: false,
            unit: String::new(),
        });
    }
    for s in &ta.steps {
        out.push(Assumption {
            name: format!("{}_duration", s.name),
            source: AssumptionSource::Duration,
            parameter: ta.locations[s.location].name.clone(),
            lo: Some(s.min_duration),
            hi: s.max_duration,
            strict: false,
            unit: "s".into(),
        });
    }
    let unit = ta.time_unit;
    for (i, l) in ta.locations.iter().enumerate() {
        if ta.steps.iter().any(|s| s.location == i) {
            continue;
        }
        for c in l.invariant.iter().filter(|c| c.is_upper_bound()) {
            out.push(Assumption {
                name: format!("{}_max", l.name),
                source: AssumptionSource::Clock,
                parameter: ta.clocks[c.left].clone(),
                lo: None,
                hi: Some(c.constant as f64 * unit),
                strict: matches!(c.cmp, Cmp::Lt),
                unit: "s".into(),
            });
        }
    }
    for c in property.clock.iter().filter(|c| !c.is_diagonal()) {
        let v = c.constant as f64 * unit;
        let (lo, hi) = match c.cmp {
            Cmp::Ge | Cmp::Gt => (Some(v), None),
            Cmp::Le | Cmp::Lt => (None, Some(v)),
            Cmp::Eq => (Some(v), Some(v)),
        };
        out.push(Assumption {
            name: format!("{}_{}", property.name, ta.clocks[c.left]),
            source: AssumptionSource::Clock,
            parameter: ta.clocks[c.left].clone(),
            lo,
            hi,
            strict: matches!(c.cmp, Cmp::Gt | Cmp::Lt),
            unit: "s".into(),
        });
    }
    out
}
