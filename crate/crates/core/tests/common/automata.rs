//! Explicit-state reachability over clock values sampled on a fine grid.

use std::collections::{HashSet, VecDeque};

use cvv_core::automata::{literals_hold, Environment, SafetyProperty, TimedAutomaton};

/// Grid resolution: clock values are multiples of 1/SCALE ticks. A quarter
/// tick separates every clock region of a two-clock automaton.
pub const SCALE: i64 = 4;

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    loc: usize,
    clocks: Vec<i64>,
    visited: u64,
}

/// Whether the bad predicate is reachable. When `edges` is given, runs are
/// restricted to exactly that edge sequence (delays are free).
pub fn explicit_reachable(ta: &TimedAutomaton, prop: &SafetyProperty, env: &Environment, edges: Option<&[usize]>) -> bool {
    let k = ta
        .max_constant()
        .max(prop.clock.iter().map(|c| c.constant.abs()).max().unwrap_or(0));
    let cap = (k + 1) * SCALE;
    let allowed: Vec<_> = (0..ta.locations.len()).map(|l| env.allowed(ta, l)).collect();
    let inv = |loc: usize, c: &[i64]| ta.locations[loc].invariant.iter().all(|g| g.holds_scaled(c, SCALE));
    let bad = |s: &State| {
        prop.clock.iter().all(|g| g.holds_scaled(&s.clocks, SCALE))
            && allowed[s.loc]
                .iter()
                .any(|&v| prop.bad.eval(s.loc, v, &|l| (s.visited >> l) & 1 == 1))
    };
    let start = State {
        loc: ta.initial,
        clocks: vec![0; ta.clocks.len()],
        visited: 1 << ta.initial,
    };
    if !inv(start.loc, &start.clocks) {
        return false;
    }
    let mut seen: HashSet<(State, usize)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((start.clone(), 0));
    queue.push_back((start, 0usize));
    while let Some((s, done)) = queue.pop_front() {
        let finished = edges.is_none_or(|seq| done == seq.len());
        if finished && bad(&s) {
            return true;
        }
        let mut next = Vec::new();
        let delayed: Vec<i64> = s.clocks.iter().map(|c| (c + 1).min(cap)).collect();
        if inv(s.loc, &delayed) {
            next.push((State { clocks: delayed, ..s.clone() }, done));
        }
        for (ei, e) in ta.edges.iter().enumerate() {
            if e.source != s.loc {
                continue;
            }
            if let Some(seq) = edges {
                if seq.get(done) != Some(&ei) {
                    continue;
                }
            }
            if !e.guard.iter().all(|g| g.holds_scaled(&s.clocks, SCALE)) {
                continue;
            }
            if !allowed[s.loc].iter().any(|&v| literals_hold(&e.observe, v)) {
                continue;
            }
            let mut c = s.clocks.clone();
            for &r in &e.resets {
                c[r] = 0;
            }
            if !inv(e.target, &c) {
                continue;
            }
            let t = State {
                loc: e.target,
                clocks: c,
                visited: s.visited | (1 << e.target),
            };
            next.push((t, done + 1));
        }
        for n in next {
            let n = if edges.is_none() { (n.0, 0) } else { n };
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    false
}
