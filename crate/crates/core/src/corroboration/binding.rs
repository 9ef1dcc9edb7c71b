use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assertions::{parse_assertions, parse_predicate, Assertion, Flavor, Kind, Pred, RelOp, Term};
use crate::automata::{export_assumptions, Assumption, ControllerFile, PropertyFile, SensingSpec, StateExpr, TimedAutomaton};
use crate::sim::Sensing;

use super::CorroborationError;

/// Action class a property demands of the ego.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandClass {
    Stop,
    Proceed,
}

impl DemandClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DemandClass::Stop => "stop",
            DemandClass::Proceed => "proceed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub when: Pred,
    pub action: DemandClass,
}

/// Scenario parameter realising an exported assumption: the scenario value
/// at `path` is `offset + x` for an assumption value `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub assumption: String,
    pub path: String,
    #[serde(default)]
    pub offset: f64,
    /// Overrides the exported range, e.g. to cap a one-sided assumption.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    when: String,
    action: DemandClass,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBinding {
    property: String,
    #[serde(default)]
    ego: Option<String>,
    #[serde(default)]
    observations: BTreeMap<String, String>,
    #[serde(default)]
    locations: BTreeMap<String, String>,
    #[serde(default)]
    demands: Vec<RawDemand>,
    #[serde(default)]
    axes: Vec<Axis>,
    #[serde(default)]
    assertions: String,
}

/// Contents of a binding file.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub property: String,
    pub ego: Option<String>,
    /// Observation symbol to sensing predicate source.
    pub observations: BTreeMap<String, String>,
    /// Location name to a trace predicate standing for it.
    pub locations: BTreeMap<String, Pred>,
    pub demands: Vec<Demand>,
    pub axes: Vec<Axis>,
    /// Hand-written assertions checked alongside the derived ones.
    pub extra: Vec<Assertion>,
}

impl Binding {
    pub fn parse(text: &str) -> Result<Binding, CorroborationError> {
        let raw: RawBinding = toml::from_str(text).map_err(|e| CorroborationError::Binding(e.to_string()))?;
        let pred = |what: String, src: &str| {
            parse_predicate(src).map_err(|e| CorroborationError::Binding(format!("{what}: {e}")))
        };
        for (name, src) in &raw.observations {
            pred(format!("observation '{name}'"), src)?;
        }
        let mut locations = BTreeMap::new();
        for (name, src) in &raw.locations {
            locations.insert(name.clone(), pred(format!("location '{name}'"), src)?);
        }
        let mut demands = Vec::new();
        for (i, d) in raw.demands.iter().enumerate() {
            demands.push(Demand {
                when: pred(format!("demands[{i}]"), &d.when)?,
                action: d.action,
            });
        }
        let extra = parse_assertions(&raw.assertions).map_err(|e| CorroborationError::Binding(e.to_string()))?;
        Ok(Binding {
            property: raw.property,
            ego: raw.ego,
            observations: raw.observations,
            locations,
            demands,
            axes: raw.axes,
            extra,
        })
    }
}

/// A property with both of its artifacts: the automaton and property
/// checked formally, and the binding used to test it in simulation.
#[derive(Debug, Clone)]
pub struct PropertyBinding {
    pub automaton: TimedAutomaton,
    pub property: PropertyFile,
    pub binding: Binding,
    pub sensing: Sensing,
}

impl PropertyBinding {
    /// Checks that the binding names the property and binds every
    /// observation of the automaton. Sensing predicates from the controller
    /// file are overridden by the binding's.
    pub fn new(
        controller: &ControllerFile,
        property: PropertyFile,
        binding: Binding,
    ) -> Result<PropertyBinding, CorroborationError> {
        if binding.property != property.property.name {
            return Err(CorroborationError::Binding(format!(
                "binding is for property '{}', got '{}'",
                binding.property, property.property.name
            )));
        }
        let ta = &controller.automaton;
        for o in &ta.observations {
            if !binding.observations.contains_key(o) {
                return Err(CorroborationError::Unbound(o.clone()));
            }
        }
        for l in binding.locations.keys() {
            if ta.location_index(l).is_none() {
                return Err(CorroborationError::Binding(format!("unknown location '{l}'")));
            }
        }
        let own = SensingSpec {
            ego: binding.ego.clone(),
            observations: binding.observations.clone(),
        };
        let mut sensing = match &controller.sensing {
            Some(s) => Sensing::parse(s)?,
            None => Sensing {
                ego: None,
                sensors: Vec::new(),
            },
        };
        sensing.merge(Sensing::parse(&own)?);
        Ok(PropertyBinding {
            automaton: ta.clone(),
            property,
            binding,
            sensing,
        })
    }

    /// Assumptions the formal verdict rests on.
    pub fn assumptions(&self) -> Vec<Assumption> {
        let p = &self.property;
        export_assumptions(&self.automaton, &p.property, &p.environment)
    }

    pub fn name(&self) -> &str {
        &self.property.property.name
    }

    fn location_pred(&self, idx: usize) -> Pred {
        let name = &self.automaton.locations[idx].name;
        self.binding
            .locations
            .get(name)
            .cloned()
            .unwrap_or_else(|| Pred::At(name.clone()))
    }

    fn translate(&self, e: &StateExpr) -> Result<Pred, CorroborationError> {
        Ok(match e {
            StateExpr::True => Pred::Const(true),
            StateExpr::At(l) => self.location_pred(*l),
            StateExpr::Visited(l) => Pred::Once(Box::new(self.location_pred(*l))),
            StateExpr::Obs(o) => {
                let name = &self.automaton.observations[*o];
                let src = self
                    .binding
                    .observations
                    .get(name)
                    .ok_or_else(|| CorroborationError::Unbound(name.clone()))?;
                parse_predicate(src).map_err(|e| CorroborationError::Binding(format!("observation '{name}': {e}")))?
            }
            StateExpr::Not(a) => Pred::not(self.translate(a)?),
            StateExpr::And(a, b) => Pred::and(self.translate(a)?, self.translate(b)?),
            StateExpr::Or(a, b) => Pred::or(self.translate(a)?, self.translate(b)?),
        })
    }
}

/// Trace assertions standing for the formal property: the invariant
/// `!bad`, then one assertion per diagram step duration bound, then the
/// binding's own assertions.
pub fn derive_assertions(pb: &PropertyBinding) -> Result<Vec<Assertion>, CorroborationError> {
    let prop = &pb.property.property;
    if !prop.clock.is_empty() {
        return Err(CorroborationError::Binding(format!(
            "property '{}' has a clock constraint, which has no trace counterpart",
            prop.name
        )));
    }
    let mut out = vec![Assertion::invariant(&prop.name, Pred::not(pb.translate(&prop.bad)?))];
    let ta = &pb.automaton;
    for s in &ta.steps {
        let here = pb.location_pred(s.location);
        if let Some(max) = s.max_duration {
            out.push(Assertion {
                name: format!("{}_max_duration", s.name),
                kind: Kind::PostCondition,
                flavor: Flavor::Temporal,
                window: Some(max + ta.time_unit),
                all_edges: false,
                trigger: Some(here.clone()),
                condition: Pred::or(
                    Pred::not(here.clone()),
                    Pred::Rel(Term::LocTime, RelOp::Le, Term::Num(max)),
                ),
            });
        }
        if s.min_duration > 0.0 {
            out.push(Assertion {
                name: format!("{}_min_duration", s.name),
                kind: Kind::PreCondition,
                flavor: Flavor::Temporal,
                window: Some(s.min_duration),
                all_edges: false,
                trigger: Some(Pred::and(Pred::Prev(Box::new(here.clone())), Pred::not(here.clone()))),
                condition: here,
            });
        }
    }
    for a in &pb.binding.extra {
        if out.iter().any(|b| b.name == a.name) {
            return Err(CorroborationError::Binding(format!("assertion '{}' is defined twice", a.name)));
        }
        out.push(a.clone());
    }
    Ok(out)
}
