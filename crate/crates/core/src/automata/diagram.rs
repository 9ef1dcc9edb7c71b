use serde::{Deserialize, Serialize};

use super::model::{parse_literals, ClockConstraint, Edge, Location, StepInfo, TimedAutomaton};
use super::AutomataError;
use crate::spatial::Cmp;

/// One step of a behaviour diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramStep {
    pub name: String,
    /// Conjunction of observation literals that must hold to enter the step.
    #[serde(default)]
    pub trigger: String,
    pub action: String,
    #[serde(default)]
    pub min_duration: f64,
    /// `None` means unbounded.
    #[serde(default)]
    pub max_duration: Option<f64>,
}

/// Alternative successor: leave `from` for the later step `to` when `guard`
/// holds (checked before the default successor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramBranch {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub guard: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDiagram {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_time_unit")]
    pub time_unit: f64,
    /// Extra observations to declare beyond those used by triggers.
    #[serde(default)]
    pub observations: Vec<String>,
    #[serde(default)]
    pub steps: Vec<DiagramStep>,
    #[serde(default)]
    pub branches: Vec<DiagramBranch>,
}

fn default_time_unit() -> f64 {
    0.1
}

pub const INIT: &str = "init";
pub const DONE: &str = "done";
pub const STEP_CLOCK: &str = "t";

fn ticks(seconds: f64, unit: f64, what: &str) -> Result<i64, AutomataError> {
    let t = seconds / unit;
    let r = t.round();
    if (t - r).abs() > 1e-6 || r.abs() > 1e12 {
        return Err(AutomataError::Diagram(format!(
            "{what} of {seconds} s is not a whole number of {unit} s ticks"
        )));
    }
    Ok(r as i64)
}

fn literal_names(text: &str) -> Vec<String> {
    text.split(['&', ','])
        .map(|s| s.trim().trim_start_matches('!').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Compiles a diagram to a timed automaton with locations `init`, one per
/// step, and `done`, and a single clock `t` reset on every step entry.
///
/// Entering step `i` requires its trigger; leaving it requires
/// `t >= min_duration`; `t <= max_duration` is the step's invariant.
pub fn compile_diagram(diagram: &RuleDiagram) -> Result<TimedAutomaton, AutomataError> {
    let bad = |m: String| Err(AutomataError::Diagram(m));
    if !(diagram.time_unit > 0.0) || !diagram.time_unit.is_finite() {
        return bad("time unit must be positive".into());
    }
    let unit = diagram.time_unit;
    let mut mins = Vec::new();
    let mut maxs = Vec::new();
    for (i, s) in diagram.steps.iter().enumerate() {
        if s.name == INIT || s.name == DONE {
            return bad(format!("step name '{}' is reserved", s.name));
        }
        if diagram.steps[..i].iter().any(|p| p.name == s.name) {
            return bad(format!("duplicate step '{}'", s.name));
        }
        if !(s.min_duration >= 0.0) || s.max_duration.is_some_and(|m| !(m >= 0.0)) {
            return bad(format!("step '{}' has a negative duration", s.name));
        }
        if s.max_duration.is_some_and(|m| m < s.min_duration) {
            return bad(format!("step '{}' has min_duration > max_duration", s.name));
        }
        mins.push(ticks(s.min_duration, unit, "min_duration")?);
        maxs.push(match s.max_duration {
            Some(m) => Some(ticks(m, unit, "max_duration")?),
            None => None,
        });
    }

    let mut observations: Vec<String> = Vec::new();
    let texts = diagram
        .steps
        .iter()
        .map(|s| s.trigger.as_str())
        .chain(diagram.branches.iter().map(|b| b.guard.as_str()));
    for name in diagram.observations.iter().cloned().chain(texts.flat_map(literal_names)) {
        if !observations.contains(&name) {
            observations.push(name);
        }
    }

    let n = diagram.steps.len();
    let clocks = vec![STEP_CLOCK.to_string()];
    let clock = |cmp, constant| ClockConstraint { left: 0, right: None, cmp, constant };
    let mut locations = vec![Location {
        name: INIT.into(),
        invariant: vec![],
        action: None,
    }];
    for (i, s) in diagram.steps.iter().enumerate() {
        locations.push(Location {
            name: s.name.clone(),
            invariant: maxs[i].map(|m| clock(Cmp::Le, m)).into_iter().collect(),
            action: Some(s.action.clone()),
        });
    }
    if n > 0 {
        locations.push(Location {
            name: DONE.into(),
            invariant: vec![],
            action: diagram.steps.last().map(|s| s.action.clone()),
        });
    }
    let step_loc = |i: usize| i + 1;
    let find = |name: &str| diagram.steps.iter().position(|s| s.name == name);

    let trigger = |i: usize| {
        let s = &diagram.steps[i];
        parse_literals(&s.trigger, &observations)
            .map_err(|e| AutomataError::parse(format!("trigger of step '{}'", s.name), e))
    };
    let mut edges = Vec::new();
    if n > 0 {
        edges.push(Edge {
            source: 0,
            target: step_loc(0),
            guard: vec![],
            observe: trigger(0)?,
            action: diagram.steps[0].action.clone(),
            resets: vec![0],
        });
    }
    for i in 0..n {
        let exit_guard: Vec<ClockConstraint> = (mins[i] > 0).then(|| clock(Cmp::Ge, mins[i])).into_iter().collect();
        for b in diagram.branches.iter().filter(|b| b.from == diagram.steps[i].name) {
            let Some(to) = find(&b.to) else {
                return bad(format!("branch target '{}' is not a step", b.to));
            };
            if to <= i {
                return bad(format!("branch {} -> {} must point forward", b.from, b.to));
            }
            let mut observe = parse_literals(&b.guard, &observations)
                .map_err(|e| AutomataError::parse(format!("guard of branch {} -> {}", b.from, b.to), e))?;
            observe.extend(trigger(to)?);
            edges.push(Edge {
                source: step_loc(i),
                target: step_loc(to),
                guard: exit_guard.clone(),
                observe,
                action: diagram.steps[to].action.clone(),
                resets: vec![0],
            });
        }
        let (target, observe, action) = if i + 1 < n {
            (step_loc(i + 1), trigger(i + 1)?, diagram.steps[i + 1].action.clone())
        } else {
            (n + 1, vec![], "finish".to_string())
        };
        edges.push(Edge {
            source: step_loc(i),
            target,
            guard: exit_guard,
            observe,
            action,
            resets: vec![0],
        });
    }
    for b in &diagram.branches {
        if find(&b.from).is_none() {
            return bad(format!("branch source '{}' is not a step", b.from));
        }
    }

    let steps = diagram
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepInfo {
            name: s.name.clone(),
            location: step_loc(i),
            min_duration: s.min_duration,
            max_duration: s.max_duration,
        })
        .collect();
    let ta = TimedAutomaton {
        name: diagram.name.clone(),
        time_unit: unit,
        clocks,
        observations,
        locations,
        initial: 0,
        edges,
        steps,
    };
    ta.validate()?;
    Ok(ta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(name: &str, trigger: &str, action: &str, min: f64, max: Option<f64>) -> DiagramStep {
        DiagramStep {
            name: name.into(),
            trigger: trigger.into(),
            action: action.into(),
            min_duration: min,
            max_duration: max,
        }
    }

    fn diagram(steps: Vec<DiagramStep>) -> RuleDiagram {
        RuleDiagram {
            name: "d".into(),
            time_unit: 0.1,
            observations: vec![],
            steps,
            branches: vec![],
        }
    }

    #[test]
    fn single_step_has_three_locations() {
        let ta = compile_diagram(&diagram(vec![step("hold", "", "stop", 1.0, Some(2.0))])).unwrap();
        assert_eq!(ta.locations.len(), 3);
        assert_eq!(ta.locations[1].invariant[0].render(&ta.clocks), "t <= 20");
        assert_eq!(ta.edges[1].guard[0].render(&ta.clocks), "t >= 10");
        assert_eq!(ta.locations[2].name, "done");
    }

    #[test]
    fn empty_diagram_is_a_single_location() {
        let ta = compile_diagram(&diagram(vec![])).unwrap();
        assert_eq!(ta.locations.len(), 1);
        assert!(ta.edges.is_empty());
    }

    #[test]
    fn malformed_diagrams() {
        let dup = diagram(vec![step("a", "", "x", 0.0, None), step("a", "", "x", 0.0, None)]);
        assert!(matches!(compile_diagram(&dup), Err(AutomataError::Diagram(m)) if m.contains("duplicate")));
        let neg = diagram(vec![step("a", "", "x", -1.0, None)]);
        assert!(compile_diagram(&neg).is_err());
        let inverted = diagram(vec![step("a", "", "x", 2.0, Some(1.0))]);
        assert!(compile_diagram(&inverted).is_err());
        let fractional = diagram(vec![step("a", "", "x", 0.05, None)]);
        assert!(compile_diagram(&fractional).is_err());
        let reserved = diagram(vec![step("done", "", "x", 0.0, None)]);
        assert!(compile_diagram(&reserved).is_err());
    }

    #[test]
    fn branches_precede_default_successor() {
        let mut d = diagram(vec![
            step("a", "", "cruise", 0.0, None),
            step("b", "p", "stop", 0.0, None),
            step("c", "q", "proceed", 0.0, None),
        ]);
        d.branches.push(DiagramBranch {
            from: "a".into(),
            to: "c".into(),
            guard: "!p".into(),
        });
        let ta = compile_diagram(&d).unwrap();
        let from_a: Vec<_> = ta.edges_from(1).map(|(_, e)| e.target).collect();
        assert_eq!(from_a, vec![3, 2]);
        d.branches[0] = DiagramBranch {
            from: "c".into(),
            to: "a".into(),
            guard: String::new(),
        };
        assert!(compile_diagram(&d).is_err());
    }
}
