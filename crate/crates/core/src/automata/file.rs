//! TOML controller and property files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::diagram::{compile_diagram, RuleDiagram};
use super::model::{parse_clock_constraints, parse_literals, Edge, Location, TimedAutomaton};
use super::property::{EnvAssumption, Environment, SafetyProperty};
use super::AutomataError;
use crate::spatial::Cmp;

/// Observation name → predicate text, evaluated by the simulator on every
/// step for agent `ego` (the scenario's ego when absent).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    #[serde(default)]
    pub ego: Option<String>,
    #[serde(default)]
    pub observations: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocation {
    name: String,
    #[serde(default)]
    invariant: String,
    #[serde(default)]
    action: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: String,
    to: String,
    #[serde(default)]
    guard: String,
    #[serde(default)]
    observe: String,
    #[serde(default)]
    action: Option<String>,
    #[serde(default)]
    reset: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    time_unit: Option<f64>,
    #[serde(default)]
    diagram: Option<RuleDiagram>,
    #[serde(default)]
    clocks: Vec<String>,
    #[serde(default)]
    observations: Vec<String>,
    #[serde(default)]
    initial: Option<String>,
    #[serde(default)]
    locations: Vec<RawLocation>,
    #[serde(default)]
    edges: Vec<RawEdge>,
    #[serde(default)]
    sensing: Option<SensingSpec>,
}

/// A parsed controller file: the automaton plus optional sensing bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerFile {
    pub automaton: TimedAutomaton,
    pub sensing: Option<SensingSpec>,
}

fn undeclared(kind: &'static str, name: &str) -> AutomataError {
    AutomataError::UndeclaredSymbol {
        kind,
        name: name.to_string(),
    }
}

/// Parses a controller file holding either a `[diagram]` table or explicit
/// `clocks`, `observations`, `[[locations]]` and `[[edges]]`.
pub fn parse_controller(text: &str) -> Result<ControllerFile, AutomataError> {
    let raw: RawController = toml::from_str(text).map_err(|e| AutomataError::File(e.to_string()))?;
    let explicit = !raw.locations.is_empty() || !raw.edges.is_empty() || !raw.clocks.is_empty();
    let automaton = match (raw.diagram, explicit) {
        (Some(_), true) => {
            return Err(AutomataError::File(
                "a controller holds either a diagram or locations/edges, not both".into(),
            ))
        }
        (Some(mut d), false) => {
            if let Some(n) = raw.name {
                d.name = n;
            }
            if let Some(u) = raw.time_unit {
                d.time_unit = u;
            }
            d.observations.extend(raw.observations);
            compile_diagram(&d)?
        }
        (None, _) => explicit_automaton(
            raw.name.unwrap_or_else(|| "controller".into()),
            raw.time_unit.unwrap_or(0.1),
            raw.clocks,
            raw.observations,
            raw.initial,
            raw.locations,
            raw.edges,
        )?,
    };
    Ok(ControllerFile {
        automaton,
        sensing: raw.sensing,
    })
}

fn explicit_automaton(
    name: String,
    time_unit: f64,
    clocks: Vec<String>,
    observations: Vec<String>,
    initial: Option<String>,
    raw_locs: Vec<RawLocation>,
    raw_edges: Vec<RawEdge>,
) -> Result<TimedAutomaton, AutomataError> {
    let mut locations = Vec::new();
    for l in &raw_locs {
        let invariant = parse_clock_constraints(&l.invariant, &clocks)
            .map_err(|e| AutomataError::parse(format!("invariant of '{}'", l.name), e))?;
        locations.push(Location {
            name: l.name.clone(),
            invariant,
            action: l.action.clone(),
        });
    }
    let loc = |n: &str| {
        locations
            .iter()
            .position(|l: &Location| l.name == n)
            .ok_or_else(|| undeclared("location", n))
    };
    let initial = match &initial {
        Some(n) => loc(n)?,
        None if !locations.is_empty() => 0,
        None => return Err(AutomataError::Invalid("automaton has no locations".into())),
    };
    let mut edges = Vec::new();
    for (i, e) in raw_edges.iter().enumerate() {
        let what = format!("edge #{i} ({} -> {})", e.from, e.to);
        let resets = e
            .reset
            .iter()
            .map(|c| clocks.iter().position(|k| k == c).ok_or_else(|| undeclared("clock", c)))
            .collect::<Result<Vec<_>, _>>()?;
        edges.push(Edge {
            source: loc(&e.from)?,
            target: loc(&e.to)?,
            guard: parse_clock_constraints(&e.guard, &clocks).map_err(|x| AutomataError::parse(format!("guard of {what}"), x))?,
            observe: parse_literals(&e.observe, &observations).map_err(|x| AutomataError::parse(format!("observations of {what}"), x))?,
            action: e.action.clone().unwrap_or_else(|| e.to.clone()),
            resets,
        });
    }
    let ta = TimedAutomaton {
        name,
        time_unit,
        clocks,
        observations,
        locations,
        initial,
        edges,
        steps: vec![],
    };
    ta.validate()?;
    Ok(ta)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRestriction {
    #[serde(default)]
    location: Option<String>,
    allow: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssumption {
    name: String,
    observation: String,
    relation: String,
    value: f64,
}

/// A parsed property file: the property and the observation environment
/// it is checked under.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyFile {
    pub property: SafetyProperty,
    pub environment: Environment,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    name: String,
    bad: String,
    #[serde(default)]
    clock: String,
    #[serde(default)]
    restrictions: Vec<RawRestriction>,
    #[serde(default)]
    assumptions: Vec<RawAssumption>,
}

pub fn load_property(text: &str, ta: &TimedAutomaton) -> Result<PropertyFile, AutomataError> {
    let raw: RawProperty = toml::from_str(text).map_err(|e| AutomataError::File(e.to_string()))?;
    let property = SafetyProperty::parse(&raw.name, &raw.bad, &raw.clock, ta)
        .map_err(|e| AutomataError::parse(format!("property '{}'", raw.name), e))?;
    let mut environment = Environment::unconstrained();
    for r in &raw.restrictions {
        environment
            .add_restriction(ta, r.location.as_deref(), &r.allow)
            .map_err(|e| AutomataError::parse("restriction", e))?;
    }
    for a in raw.assumptions {
        if ta.observation_index(&a.observation).is_none() {
            return Err(undeclared("observation", &a.observation));
        }
        let relation = Cmp::parse(&a.relation)
            .ok_or_else(|| AutomataError::File(format!("unknown relation '{}' in assumption '{}'", a.relation, a.name)))?;
        environment.assumptions.push(EnvAssumption {
            name: a.name,
            observation: a.observation,
            relation,
            value: a.value,
        });
    }
    Ok(PropertyFile { property, environment })
}
