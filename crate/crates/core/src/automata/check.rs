use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::dbm::{DbmConstraint, Zone};
use super::model::{dbm_constraints, literals_hold, ClockConstraint, TimedAutomaton, Valuation};
use super::property::{Environment, SafetyProperty, StateExpr};
use super::AutomataError;

/// One element of a counterexample: time passes in a location, or an edge
/// fires under the given observation valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessStep {
    Delay {
        location: String,
        zone: String,
    },
    Edge {
        edge: usize,
        action: String,
        from: String,
        to: String,
        observations: BTreeMap<String, bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub steps: Vec<WitnessStep>,
    /// Observation valuation under which the bad predicate holds at the end.
    pub bad_observations: BTreeMap<String, bool>,
}

impl Witness {
    pub fn edges(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                WitnessStep::Edge { edge, .. } => Some(*edge),
                WitnessStep::Delay { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Safe { states: usize },
    Unsafe { states: usize, witness: Witness },
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Unsafe { witness, .. } => Some(witness),
            Verdict::Safe { .. } => None,
        }
    }
}

pub(crate) fn valuation_map(ta: &TimedAutomaton, v: Valuation) -> BTreeMap<String, bool> {
    ta.observations
        .iter()
        .enumerate()
        .map(|(i, o)| (o.clone(), (v >> i) & 1 == 1))
        .collect()
}

pub(crate) fn valuation_from_map(ta: &TimedAutomaton, m: &BTreeMap<String, bool>) -> Result<Valuation, AutomataError> {
    let mut v = 0;
    for (name, val) in m {
        let i = ta.observation_index(name).ok_or_else(|| AutomataError::UndeclaredSymbol {
            kind: "observation",
            name: name.clone(),
        })?;
        if *val {
            v |= 1 << i;
        }
    }
    Ok(v)
}

/// Tracks which of the locations named in `visited(..)` atoms were entered.
struct History {
    tracked: Vec<usize>,
}

impl History {
    fn new(bad: &StateExpr) -> History {
        let mut tracked = Vec::new();
        bad.visited_locations(&mut tracked);
        History { tracked }
    }

    fn enter(&self, mask: u64, loc: usize) -> u64 {
        match self.tracked.iter().position(|&l| l == loc) {
            Some(i) => mask | (1 << i),
            None => mask,
        }
    }

    fn is_bad(&self, bad: &StateExpr, loc: usize, v: Valuation, mask: u64) -> bool {
        let seen = |l: usize| self.tracked.iter().position(|&t| t == l).is_some_and(|i| (mask >> i) & 1 == 1);
        bad.eval(loc, v, &seen)
    }
}

struct Search<'a> {
    ta: &'a TimedAutomaton,
    property: &'a SafetyProperty,
    allowed: Vec<Vec<Valuation>>,
    invariants: Vec<Vec<DbmConstraint>>,
    guards: Vec<Vec<DbmConstraint>>,
    bad_clock: Vec<DbmConstraint>,
    k: i64,
    diagonals: Vec<DbmConstraint>,
    history: History,
}

fn check_symbols(ta: &TimedAutomaton, property: &SafetyProperty) -> Result<(), AutomataError> {
    let mut locs = Vec::new();
    property.bad.visited_locations(&mut locs);
    let mut at = Vec::new();
    collect_at(&property.bad, &mut at);
    if let Some(&l) = locs.iter().chain(&at).find(|&&l| l >= ta.locations.len()) {
        return Err(AutomataError::UndeclaredSymbol {
            kind: "location",
            name: format!("#{l}"),
        });
    }
    let mut obs = Vec::new();
    property.bad.observations(&mut obs);
    if let Some(&o) = obs.iter().find(|&&o| o >= ta.observations.len()) {
        return Err(AutomataError::UndeclaredSymbol {
            kind: "observation",
            name: format!("#{o}"),
        });
    }
    let n = ta.clocks.len();
    if property.clock.iter().any(|c| c.left >= n || c.right.is_some_and(|r| r >= n)) {
        return Err(AutomataError::UndeclaredSymbol {
            kind: "clock",
            name: "in property".into(),
        });
    }
    Ok(())
}

fn collect_at(e: &StateExpr, out: &mut Vec<usize>) {
    match e {
        StateExpr::At(l) => out.push(*l),
        StateExpr::Not(a) => collect_at(a, out),
        StateExpr::And(a, b) | StateExpr::Or(a, b) => {
            collect_at(a, out);
            collect_at(b, out);
        }
        _ => {}
    }
}

impl<'a> Search<'a> {
    fn new(ta: &'a TimedAutomaton, property: &'a SafetyProperty, env: &Environment) -> Result<Search<'a>, AutomataError> {
        ta.validate()?;
        check_symbols(ta, property)?;
        let prop_k = property.clock.iter().map(|c| c.constant.abs()).max().unwrap_or(0);
        let mut diagonal_cs: Vec<ClockConstraint> = ta.diagonal_constraints();
        diagonal_cs.extend(property.clock.iter().filter(|c| c.is_diagonal()).cloned());
        let mut diagonals: Vec<DbmConstraint> = Vec::new();
        for c in &diagonal_cs {
            for a in c.to_dbm() {
                if !diagonals.contains(&a) {
                    diagonals.push(a);
                }
            }
        }
        Ok(Search {
            ta,
            property,
            allowed: (0..ta.locations.len()).map(|l| env.allowed(ta, l)).collect(),
            invariants: ta.locations.iter().map(|l| dbm_constraints(&l.invariant)).collect(),
            guards: ta.edges.iter().map(|e| dbm_constraints(&e.guard)).collect(),
            bad_clock: dbm_constraints(&property.clock),
            k: ta.max_constant().max(prop_k),
            diagonals,
            history: History::new(&property.bad),
        })
    }

    fn dim(&self) -> usize {
        self.ta.clocks.len()
    }

    /// Delay closure inside the invariant of `loc`.
    fn delay(&self, z: &Zone, loc: usize) -> Result<Zone, AutomataError> {
        Ok(z.up().intersect_all(&self.invariants[loc])?)
    }

    /// k-normalisation refined by the diagonal constraints so that no
    /// diagonal guard changes truth value inside a normalised piece.
    fn normalize(&self, z: &Zone) -> Result<Vec<Zone>, AutomataError> {
        let mut pieces = vec![(z.clone(), Vec::new())];
        for d in &self.diagonals {
            let mut next = Vec::new();
            for (p, applied) in pieces {
                for c in [*d, d.negated()] {
                    let q = p.intersect(&c)?;
                    if !q.is_empty() {
                        let mut a: Vec<DbmConstraint> = applied.clone();
                        a.push(c);
                        next.push((q, a));
                    }
                }
            }
            pieces = next;
        }
        let mut out = Vec::new();
        for (p, applied) in pieces {
            let n = p.normalize(self.k).intersect_all(&applied)?;
            if !n.is_empty() {
                out.push(n);
            }
        }
        Ok(out)
    }

    fn bad_valuation(&self, loc: usize, mask: u64, z: &Zone) -> Result<Option<Valuation>, AutomataError> {
        if z.intersect_all(&self.bad_clock)?.is_empty() {
            return Ok(None);
        }
        Ok(self.allowed[loc]
            .iter()
            .copied()
            .find(|&v| self.history.is_bad(&self.property.bad, loc, v, mask)))
    }

    fn edge_valuation(&self, edge: usize) -> Option<Valuation> {
        let e = &self.ta.edges[edge];
        self.allowed[e.source].iter().copied().find(|&v| literals_hold(&e.observe, v))
    }

    /// Exact (non-normalised) successor zone through `edge`, delay included.
    fn successor(&self, z: &Zone, edge: usize) -> Result<Zone, AutomataError> {
        let e = &self.ta.edges[edge];
        let g = z.intersect_all(&self.guards[edge])?;
        if g.is_empty() {
            return Ok(g);
        }
        let resets: Vec<usize> = e.resets.iter().map(|r| r + 1).collect();
        let r = g.reset(&resets).intersect_all(&self.invariants[e.target])?;
        if r.is_empty() {
            return Ok(r);
        }
        self.delay(&r, e.target)
    }
}

struct Node {
    loc: usize,
    mask: u64,
    zone: Zone,
    parent: Option<(usize, usize, Valuation)>,
}

/// Zone-graph reachability of the property's bad predicate, breadth first
/// with inclusion subsumption. The first witness found has the fewest
/// edges; ties are broken by edge declaration order.
pub fn reachability(ta: &TimedAutomaton, property: &SafetyProperty, env: &Environment) -> Result<Verdict, AutomataError> {
    let s = Search::new(ta, property, env)?;
    let mut nodes: Vec<Node> = Vec::new();
    let mut passed: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    let mut queue = VecDeque::new();

    let init = ta.initial;
    let z0 = Zone::zero(s.dim()).intersect_all(&s.invariants[init])?;
    if z0.is_empty() {
        return Ok(Verdict::Safe { states: 0 });
    }
    let z0 = s.delay(&z0, init)?;
    let mask0 = s.history.enter(0, init);
    let mut pending: Vec<(usize, u64, Zone, Option<(usize, usize, Valuation)>)> = Vec::new();
    for z in s.normalize(&z0)? {
        pending.push((init, mask0, z, None));
    }
    loop {
        for (loc, mask, zone, parent) in pending.drain(..) {
            let seen = passed.entry((loc, mask)).or_default();
            if seen.iter().any(|&i| nodes[i].zone.includes(&zone)) {
                continue;
            }
            let id = nodes.len();
            seen.push(id);
            if let Some(v) = s.bad_valuation(loc, mask, &zone)? {
                nodes.push(Node { loc, mask, zone, parent });
                let witness = build_witness(&s, &nodes, id, v)?;
                return Ok(Verdict::Unsafe {
                    states: nodes.len(),
                    witness,
                });
            }
            nodes.push(Node { loc, mask, zone, parent });
            queue.push_back(id);
        }
        let Some(id) = queue.pop_front() else {
            break;
        };
        let (loc, mask) = (nodes[id].loc, nodes[id].mask);
        for (ei, e) in ta.edges_from(loc) {
            let Some(v) = s.edge_valuation(ei) else {
                continue;
            };
            let succ = s.successor(&nodes[id].zone, ei)?;
            if succ.is_empty() {
                continue;
            }
            let m = s.history.enter(mask, e.target);
            for z in s.normalize(&succ)? {
                pending.push((e.target, m, z, Some((id, ei, v))));
            }
        }
    }
    Ok(Verdict::Safe { states: nodes.len() })
}

fn build_witness(s: &Search, nodes: &[Node], last: usize, bad: Valuation) -> Result<Witness, AutomataError> {
    let mut chain = vec![last];
    let mut cur = last;
    while let Some((p, _, _)) = nodes[cur].parent {
        chain.push(p);
        cur = p;
    }
    chain.reverse();
    // Recompute exact zones along the path; the normalised ones may be
    // wider than what is actually reachable.
    let ta = s.ta;
    let mut zone = s.delay(&Zone::zero(s.dim()).intersect_all(&s.invariants[ta.initial])?, ta.initial)?;
    let mut steps = Vec::new();
    for (i, &id) in chain.iter().enumerate() {
        if i > 0 {
            let (_, ei, v) = nodes[id].parent.expect("non-root node has a parent");
            let e = &ta.edges[ei];
            steps.push(WitnessStep::Edge {
                edge: ei,
                action: e.action.clone(),
                from: ta.locations[e.source].name.clone(),
                to: ta.locations[e.target].name.clone(),
                observations: valuation_map(ta, v),
            });
            zone = s.successor(&zone, ei)?;
        }
        let shown = zone.intersect_all(if i + 1 == chain.len() { &s.bad_clock } else { &[] })?;
        steps.push(WitnessStep::Delay {
            location: ta.locations[nodes[id].loc].name.clone(),
            zone: shown.describe(&ta.clocks),
        });
    }
    Ok(Witness {
        steps,
        bad_observations: valuation_map(ta, bad),
    })
}

/// Checks a witness against the automaton semantics with exact zones:
/// locations and edges must chain, every edge guard and target invariant
/// must be satisfiable, every valuation must be allowed by `env`, and the
/// bad predicate must hold at the end.
pub fn replay(ta: &TimedAutomaton, property: &SafetyProperty, env: &Environment, witness: &Witness) -> Result<(), AutomataError> {
    let s = Search::new(ta, property, env)?;
    let fail = |m: String| Err(AutomataError::Replay(m));
    let mut loc = ta.initial;
    let mut mask = s.history.enter(0, loc);
    let z0 = Zone::zero(s.dim()).intersect_all(&s.invariants[loc])?;
    if z0.is_empty() {
        return fail("initial valuation violates the initial invariant".into());
    }
    let mut zone = s.delay(&z0, loc)?;
    let mut expect_delay = true;
    for (i, step) in witness.steps.iter().enumerate() {
        match step {
            WitnessStep::Delay { location, .. } => {
                if !expect_delay || ta.locations[loc].name != *location {
                    return fail(format!("step {i}: unexpected delay in '{location}'"));
                }
                expect_delay = false;
            }
            WitnessStep::Edge { edge, observations, .. } => {
                if expect_delay {
                    return fail(format!("step {i}: edge without preceding delay"));
                }
                let Some(e) = ta.edges.get(*edge) else {
                    return fail(format!("step {i}: no edge #{edge}"));
                };
                if e.source != loc {
                    return fail(format!("step {i}: edge #{edge} does not leave '{}'", ta.locations[loc].name));
                }
                let v = valuation_from_map(ta, observations)?;
                if !s.allowed[loc].contains(&v) || !literals_hold(&e.observe, v) {
                    return fail(format!("step {i}: observations do not enable edge #{edge}"));
                }
                zone = s.successor(&zone, *edge)?;
                if zone.is_empty() {
                    return fail(format!("step {i}: guard or invariant of edge #{edge} unsatisfiable"));
                }
                loc = e.target;
                mask = s.history.enter(mask, loc);
                expect_delay = true;
            }
        }
    }
    if expect_delay {
        return fail("witness must end with a delay".into());
    }
    let v = valuation_from_map(ta, &witness.bad_observations)?;
    if !s.allowed[loc].contains(&v) || !s.history.is_bad(&property.bad, loc, v, mask) {
        return fail("bad predicate does not hold at the end".into());
    }
    if zone.intersect_all(&s.bad_clock)?.is_empty() {
        return fail("clock condition of the property is unreachable at the end".into());
    }
    Ok(())
}

/// One discrete step of a concrete run: the observations presented at this
/// step and the edge (if any) taken from it. Clock values are in ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteStep {
    pub location: usize,
    pub clocks: Vec<i64>,
    pub observations: Valuation,
    pub edge: Option<usize>,
}

/// A witness realised at a fixed step length of `quantum` ticks, with at
/// most one edge per step and the first enabled edge (declaration order)
/// always being the witness edge. The last step is the bad state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteRun {
    pub quantum: i64,
    pub steps: Vec<ConcreteStep>,
}

const CONCRETIZE_BUDGET: usize = 200_000;

struct Concretizer<'a> {
    s: Search<'a>,
    edges: Vec<usize>,
    q: i64,
    max_wait: i64,
    budget: usize,
}

impl Concretizer<'_> {
    fn inv_ok(&self, loc: usize, clocks: &[i64]) -> bool {
        self.s.ta.locations[loc].invariant.iter().all(|c| c.holds_scaled(clocks, 1))
    }

    fn enabled(&self, ei: usize, clocks: &[i64], v: Valuation) -> bool {
        let e = &self.s.ta.edges[ei];
        if !literals_hold(&e.observe, v) || !e.guard.iter().all(|c| c.holds_scaled(clocks, 1)) {
            return false;
        }
        let reset = reset_clocks(clocks, &e.resets);
        self.inv_ok(e.target, &reset)
    }

    /// Valuation that keeps the automaton in `loc` for one step.
    fn idle(&self, loc: usize, clocks: &[i64]) -> Option<Valuation> {
        self.s.allowed[loc]
            .iter()
            .copied()
            .find(|&v| self.s.ta.edges_from(loc).all(|(ei, _)| !self.enabled(ei, clocks, v)))
    }

    /// Valuation under which `ei` is the first enabled edge.
    fn firing(&self, ei: usize, clocks: &[i64]) -> Option<Valuation> {
        let loc = self.s.ta.edges[ei].source;
        self.s.allowed[loc].iter().copied().find(|&v| {
            self.enabled(ei, clocks, v)
                && self
                    .s
                    .ta
                    .edges_from(loc)
                    .take_while(|(j, _)| *j != ei)
                    .all(|(j, _)| !self.enabled(j, clocks, v))
        })
    }

    fn search(&mut self, loc: usize, mask: u64, clocks: Vec<i64>, next: usize, out: &mut Vec<ConcreteStep>) -> bool {
        let mut clocks = clocks;
        let start = out.len();
        for _ in 0..=self.max_wait {
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            if next == self.edges.len() {
                let at_bad = self.s.property.clock.iter().all(|c| c.holds_scaled(&clocks, 1));
                let bad = self.s.allowed[loc]
                    .iter()
                    .copied()
                    .find(|&v| self.s.history.is_bad(&self.s.property.bad, loc, v, mask));
                if let (true, Some(v)) = (at_bad, bad) {
                    out.push(ConcreteStep { location: loc, clocks: clocks.clone(), observations: v, edge: None });
                    return true;
                }
            } else {
                let ei = self.edges[next];
                if let Some(v) = self.firing(ei, &clocks) {
                    let e = &self.s.ta.edges[ei];
                    let after: Vec<i64> = reset_clocks(&clocks, &e.resets).iter().map(|c| c + self.q).collect();
                    if self.inv_ok(e.target, &after) {
                        out.push(ConcreteStep { location: loc, clocks: clocks.clone(), observations: v, edge: Some(ei) });
                        let m = self.s.history.enter(mask, e.target);
                        if self.search(e.target, m, after, next + 1, out) {
                            return true;
                        }
                        out.pop();
                    }
                }
            }
            // wait one step
            let Some(v) = self.idle(loc, &clocks) else {
                break;
            };
            let after: Vec<i64> = clocks.iter().map(|c| c + self.q).collect();
            if !self.inv_ok(loc, &after) {
                break;
            }
            out.push(ConcreteStep { location: loc, clocks: clocks.clone(), observations: v, edge: None });
            clocks = after;
        }
        out.truncate(start);
        false
    }
}

fn reset_clocks(clocks: &[i64], resets: &[usize]) -> Vec<i64> {
    let mut c = clocks.to_vec();
    for &r in resets {
        c[r] = 0;
    }
    c
}

/// Realises `witness` as a discrete run with step length `quantum` ticks,
/// or `None` if its edge sequence cannot be driven at that granularity.
pub fn concretize(
    ta: &TimedAutomaton,
    property: &SafetyProperty,
    env: &Environment,
    witness: &Witness,
    quantum: i64,
) -> Result<Option<ConcreteRun>, AutomataError> {
    if quantum < 1 {
        return Err(AutomataError::Invalid("quantum must be at least one tick".into()));
    }
    let s = Search::new(ta, property, env)?;
    let max_wait = (s.k / quantum) + 2;
    let mut c = Concretizer {
        s,
        edges: witness.edges(),
        q: quantum,
        max_wait,
        budget: CONCRETIZE_BUDGET,
    };
    let init = ta.initial;
    let clocks = vec![0; ta.clocks.len()];
    if !c.inv_ok(init, &clocks) {
        return Ok(None);
    }
    let mask = c.s.history.enter(0, init);
    let mut steps = Vec::new();
    Ok(c.search(init, mask, clocks, 0, &mut steps).then_some(ConcreteRun { quantum, steps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::parse_controller;

    const GUARDED: &str = r#"
clocks = ["x"]
observations = ["go"]
[[locations]]
name = "wait"
invariant = "x <= 1"
[[locations]]
name = "bad"
[[edges]]
from = "wait"
to = "bad"
guard = "x >= 2"
"#;

    #[test]
    fn guard_excluded_by_invariant_is_safe() {
        let ta = parse_controller(GUARDED).unwrap().automaton;
        let p = SafetyProperty::parse("p", "at(bad)", "", &ta).unwrap();
        let v = reachability(&ta, &p, &Environment::unconstrained()).unwrap();
        assert!(v.is_safe());
    }

    #[test]
    fn reachable_bad_location_has_replayable_witness() {
        let ta = parse_controller(&GUARDED.replace("guard = \"x >= 2\"", "guard = \"x >= 1\"\nobserve = \"go\"")).unwrap().automaton;
        let p = SafetyProperty::parse("p", "at(bad)", "", &ta).unwrap();
        let env = Environment::unconstrained();
        let v = reachability(&ta, &p, &env).unwrap();
        let w = v.witness().expect("unsafe");
        assert_eq!(w.edges(), vec![0]);
        replay(&ta, &p, &env, w).unwrap();
        let run = concretize(&ta, &p, &env, w, 1).unwrap().unwrap();
        assert_eq!(run.steps.len(), 3);
        assert_eq!(run.steps[1].edge, Some(0));
        assert_eq!(run.steps[1].clocks, vec![1]);
        // one step is longer than the invariant allows
        assert!(concretize(&ta, &p, &env, w, 2).unwrap().is_none());
    }

    #[test]
    fn restricted_environment_blocks_edge() {
        let ta = parse_controller(&GUARDED.replace("guard = \"x >= 2\"", "observe = \"go\"")).unwrap().automaton;
        let p = SafetyProperty::parse("p", "at(bad)", "", &ta).unwrap();
        let mut env = Environment::unconstrained();
        env.add_restriction(&ta, Some("wait"), "!go").unwrap();
        assert!(reachability(&ta, &p, &env).unwrap().is_safe());
        assert!(!reachability(&ta, &p, &Environment::unconstrained()).unwrap().is_safe());
    }

    #[test]
    fn tampered_witness_is_rejected() {
        let ta = parse_controller(&GUARDED.replace("x >= 2", "x >= 1")).unwrap().automaton;
        let p = SafetyProperty::parse("p", "at(bad)", "", &ta).unwrap();
        let env = Environment::unconstrained();
        let mut w = reachability(&ta, &p, &env).unwrap().witness().unwrap().clone();
        w.steps.pop();
        assert!(replay(&ta, &p, &env, &w).is_err());
    }

    #[test]
    fn diagonal_guards_are_respected() {
        let src = r#"
clocks = ["x", "y"]
[[locations]]
name = "a"
[[locations]]
name = "b"
[[locations]]
name = "bad"
[[edges]]
from = "a"
to = "b"
guard = "x >= 3"
reset = ["y"]
[[edges]]
from = "b"
to = "bad"
guard = "x - y < 3 & y >= 1"
"#;
        // in b, x - y is at least 3
        let ta = parse_controller(src).unwrap().automaton;
        let p = SafetyProperty::parse("p", "at(bad)", "", &ta).unwrap();
        assert!(reachability(&ta, &p, &Environment::unconstrained()).unwrap().is_safe());
        let ta = parse_controller(&src.replace("x - y < 3", "x - y <= 3")).unwrap().automaton;
        let v = reachability(&ta, &p, &Environment::unconstrained()).unwrap();
        assert!(!v.is_safe());
    }
}
