//! Random traces and a full-scan reference checker for assertions.

use std::collections::BTreeMap;

use cvv_core::sim::{quantize, AgentInfo, AgentRecord, ObservationMode, Trace, TraceHeader, TraceStep};
use cvv_core::traffic::{AgentKind, RoadNetwork, TurnSignal, WorldConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-9;
const LOCATIONS: [&str; 3] = ["a", "b", "c"];

pub fn random_trace(rng: &mut ChaCha8Rng, max_steps: usize) -> Trace {
    let n = rng.gen_range(1..=max_steps);
    let header = TraceHeader {
        scenario_digest: String::new(),
        controller_digest: String::new(),
        ego: "E".into(),
        network: RoadNetwork {
            lanes: vec!["main".into()],
            lane_length: 1000.0,
            intersection: vec![],
            signs: vec![],
            crossings: vec![],
        },
        world: WorldConfig::default(),
        agents: ["E", "M"]
            .iter()
            .map(|id| AgentInfo {
                id: id.to_string(),
                size: 4.0,
                kind: AgentKind::Car,
            })
            .collect(),
        dt: 0.1,
        seed: 0,
        observations: ObservationMode::Scripted,
    };
    let record = |id: &str, pos: f64, speed: f64| AgentRecord {
        id: id.into(),
        lane: "main".into(),
        pos,
        speed,
        accel: 0.0,
        turn_signal: TurnSignal::Off,
        aut: id == "E",
    };
    let mut pos = 0.0;
    let mut speed: f64 = rng.gen_range(0..=4) as f64;
    let mut m_live = true;
    let mut o = [false; 2];
    let mut loc = 0;
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        // piecewise-constant signals with random switching
        if rng.gen_bool(0.1) {
            speed = rng.gen_range(0..=8) as f64 / 2.0;
        }
        for b in &mut o {
            if rng.gen_bool(0.15) {
                *b = !*b;
            }
        }
        if rng.gen_bool(0.05) {
            m_live = !m_live;
        }
        if rng.gen_bool(0.08) {
            loc = rng.gen_range(0..LOCATIONS.len());
        }
        let mut agents = vec![record("E", pos, speed)];
        if m_live {
            agents.push(record("M", 500.0, 3.0));
        }
        steps.push(TraceStep {
            step: k,
            time: quantize(k as f64 * 0.1),
            agents,
            observations: BTreeMap::from([("o1".to_string(), o[0]), ("o2".to_string(), o[1])]),
            location: LOCATIONS[loc].into(),
            command: "hold".into(),
        });
        pos = quantize(pos + speed * 0.1);
    }
    Trace { header, steps }
}

#[derive(Debug, Clone)]
pub enum T {
    Num(f64),
    Speed(&'static str),
    Pos(&'static str),
    Time,
    LocTime,
}

#[derive(Debug, Clone)]
pub enum P {
    Obs(&'static str),
    At(&'static str),
    Rel(T, &'static str, T),
    Not(Box<P>),
    And(Box<P>, Box<P>),
    Or(Box<P>, Box<P>),
    Once(Box<P>),
    Prev(Box<P>),
}

impl T {
    fn render(&self) -> String {
        match self {
            T::Num(v) => format!("{v}"),
            T::Speed(a) => format!("speed({a})"),
            T::Pos(a) => format!("pos({a})"),
            T::Time => "time".into(),
            T::LocTime => "loc_time".into(),
        }
    }
}

impl P {
    pub fn render(&self) -> String {
        match self {
            P::Obs(o) => format!("obs({o})"),
            P::At(l) => format!("at(\"{l}\")"),
            P::Rel(a, op, b) => format!("{} {op} {}", a.render(), b.render()),
            P::Not(a) => format!("!({})", a.render()),
            P::And(a, b) => format!("({} & {})", a.render(), b.render()),
            P::Or(a, b) => format!("({} | {})", a.render(), b.render()),
            P::Once(a) => format!("once({})", a.render()),
            P::Prev(a) => format!("prev({})", a.render()),
        }
    }
}

fn random_atom(rng: &mut ChaCha8Rng) -> P {
    match rng.gen_range(0..6) {
        0 => P::Obs(["o1", "o2"].choose(rng).unwrap()),
        1 => P::At(LOCATIONS.choose(rng).unwrap()),
        2 => P::Rel(
            T::Speed(["ego", "M"].choose(rng).unwrap()),
            [">", ">=", "<", "<=", "==", "!="].choose(rng).unwrap(),
            T::Num(rng.gen_range(0..=8) as f64 / 2.0),
        ),
        3 => P::Rel(T::LocTime, ["<=", ">"].choose(rng).unwrap(), T::Num(rng.gen_range(0..=20) as f64 / 10.0)),
        4 => P::Rel(T::Time, [">=", "<"].choose(rng).unwrap(), T::Num(rng.gen_range(0..=100) as f64 / 10.0)),
        _ => P::Rel(T::Pos("ego"), ["<=", ">"].choose(rng).unwrap(), T::Num(rng.gen_range(0..=40) as f64)),
    }
}

pub fn random_pred(rng: &mut ChaCha8Rng, depth: usize) -> P {
    if depth == 0 || rng.gen_bool(0.35) {
        return random_atom(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_pred(rng, depth - 1));
    match rng.gen_range(0..6) {
        0 => P::Not(sub(rng)),
        1 => P::And(sub(rng), sub(rng)),
        2 => P::Or(sub(rng), sub(rng)),
        3 => P::Once(sub(rng)),
        4 => P::Prev(sub(rng)),
        _ => P::Not(sub(rng)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NKind {
    Invariant,
    Execution,
    Pre,
    Post,
}

#[derive(Debug, Clone)]
pub struct NAssertion {
    pub kind: NKind,
    pub physical: bool,
    pub window: f64,
    pub all_edges: bool,
    pub trigger: P,
    pub condition: P,
}

impl NAssertion {
    pub fn render(&self, name: &str) -> String {
        let kind = match self.kind {
            NKind::Invariant => "invariant",
            NKind::Execution => "execution",
            NKind::Pre => "pre",
            NKind::Post => "post",
        };
        let mut s = format!("assert {name} kind={kind}");
        if matches!(self.kind, NKind::Pre | NKind::Post) {
            let fl = if self.physical { "physical" } else { "temporal" };
            s += &format!(" flavor={fl} window={}", self.window);
        }
        if self.all_edges && self.kind != NKind::Invariant {
            s += " edges=all";
        }
        if self.kind != NKind::Invariant {
            s += &format!("\n  trigger: {}", self.trigger.render());
        }
        s + &format!("\n  condition: {}\n", self.condition.render())
    }
}

pub fn random_assertion(rng: &mut ChaCha8Rng) -> NAssertion {
    let kind = [NKind::Invariant, NKind::Execution, NKind::Pre, NKind::Post][rng.gen_range(0..4)];
    let physical = rng.gen_bool(0.5);
    let window = if physical {
        rng.gen_range(1..=40) as f64 / 4.0
    } else {
        rng.gen_range(1..=30) as f64 / 10.0
    };
    NAssertion {
        kind,
        physical,
        window,
        all_edges: rng.gen_bool(0.25),
        trigger: random_pred(rng, 2),
        condition: random_pred(rng, 3),
    }
}

fn rel(op: &str, a: f64, b: f64) -> bool {
    match op {
        "<" => a < b - EPS,
        "<=" => a <= b + EPS,
        ">" => a > b + EPS,
        ">=" => a >= b - EPS,
        "==" => (a - b).abs() <= EPS,
        "!=" => (a - b).abs() > EPS,
        _ => unreachable!(),
    }
}

fn term(t: &T, tr: &Trace, k: usize) -> Option<f64> {
    let s = &tr.steps[k];
    let agent = |a: &str| {
        let id = if a == "ego" { "E" } else { a };
        s.agents.iter().find(|r| r.id == id)
    };
    Some(match t {
        T::Num(v) => *v,
        T::Speed(a) => agent(a)?.speed,
        T::Pos(a) => agent(a)?.pos,
        T::Time => s.time,
        T::LocTime => {
            let mut j = k;
            while j > 0 && tr.steps[j - 1].location == s.location {
                j -= 1;
            }
            s.time - tr.steps[j].time
        }
    })
}

pub fn holds(p: &P, tr: &Trace, k: usize) -> bool {
    match p {
        P::Obs(o) => tr.steps[k].observations[*o],
        P::At(l) => tr.steps[k].location == *l,
        P::Rel(a, op, b) => match (term(a, tr, k), term(b, tr, k)) {
            (Some(x), Some(y)) => rel(op, x, y),
            _ => false,
        },
        P::Not(a) => !holds(a, tr, k),
        P::And(a, b) => holds(a, tr, k) && holds(b, tr, k),
        P::Or(a, b) => holds(a, tr, k) || holds(b, tr, k),
        P::Once(a) => (0..=k).any(|j| holds(a, tr, j)),
        P::Prev(a) => k > 0 && holds(a, tr, k - 1),
    }
}

fn arc(tr: &Trace, k: usize) -> f64 {
    (1..=k).map(|j| (tr.steps[j].agents[0].pos - tr.steps[j - 1].agents[0].pos).abs()).sum()
}

/// (verdict, reference points, (reference, failing step) pairs).
pub fn naive_check(a: &NAssertion, tr: &Trace) -> (&'static str, Vec<usize>, Vec<(Option<usize>, usize)>) {
    let n = tr.steps.len();
    let cond: Vec<bool> = (0..n).map(|k| holds(&a.condition, tr, k)).collect();
    if a.kind == NKind::Invariant {
        let f: Vec<_> = (0..n).filter(|&k| !cond[k]).map(|k| (None, k)).collect();
        return (if f.is_empty() { "pass" } else { "fail" }, Vec::new(), f);
    }
    let trig: Vec<bool> = (0..n).map(|k| holds(&a.trigger, tr, k)).collect();
    let refs: Vec<usize> = (0..n)
        .filter(|&k| trig[k] && (a.all_edges || k == 0 || !trig[k - 1]))
        .collect();
    let key = |k: usize| if a.physical { arc(tr, k) } else { tr.steps[k].time };
    let mut fails = Vec::new();
    for &r in &refs {
        let at = key(r);
        for k in 0..n {
            let inside = match a.kind {
                NKind::Execution => k == r,
                NKind::Pre => k < r && key(k) >= at - a.window - EPS,
                NKind::Post => k > r && key(k) <= at + a.window + EPS,
                NKind::Invariant => unreachable!(),
            };
            if inside && !cond[k] {
                fails.push((Some(r), k));
            }
        }
    }
    let verdict = if refs.is_empty() {
        "vacuous"
    } else if fails.is_empty() {
        "pass"
    } else {
        "fail"
    };
    (verdict, refs, fails)
}
