//! Brute-force spatial-logic evaluation on a 1 cm grid, for scenes whose
//! coordinates all lie on a 10 cm grid.

use std::collections::HashMap;

use cvv_core::spatial::Cmp;
use cvv_core::traffic::{Agent, AgentKind, LaneInterval, RoadNetwork, Sign, SignKind, Snapshot, TurnSignal, View, WorldConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RawAgent {
    pub lane: usize,
    pub pos: i64,
    pub size: i64,
    /// Whole m/s, so that the braking distance v²/10 m is on the grid.
    pub speed: i64,
    pub aut: bool,
    pub pedestrian: bool,
}

#[derive(Debug, Clone)]
pub struct RawScene {
    pub lanes: usize,
    pub len: i64,
    pub inter: Vec<Option<(i64, i64)>>,
    pub signs: Vec<(usize, i64, SignKind)>,
    pub crossings: Vec<(usize, i64, i64)>,
    pub agents: Vec<RawAgent>,
}

fn m(cm: i64) -> f64 {
    cm as f64 / 100.0
}

fn lane_name(i: usize) -> String {
    format!("L{i}")
}

pub fn agent_name(i: usize) -> String {
    format!("A{i}")
}

impl RawScene {
    pub fn snapshot(&self) -> Snapshot {
        let network = RoadNetwork {
            lanes: (0..self.lanes).map(lane_name).collect(),
            lane_length: m(self.len),
            intersection: self
                .inter
                .iter()
                .enumerate()
                .filter_map(|(l, iv)| {
                    iv.map(|(lo, hi)| LaneInterval {
                        lane: lane_name(l),
                        lo: m(lo),
                        hi: m(hi),
                    })
                })
                .collect(),
            signs: self
                .signs
                .iter()
                .map(|&(l, p, kind)| Sign {
                    kind,
                    lane: lane_name(l),
                    pos: m(p),
                })
                .collect(),
            crossings: self
                .crossings
                .iter()
                .map(|&(l, lo, hi)| LaneInterval {
                    lane: lane_name(l),
                    lo: m(lo),
                    hi: m(hi),
                })
                .collect(),
        };
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| Agent {
                id: agent_name(i),
                lane: lane_name(a.lane),
                pos: m(a.pos),
                speed: a.speed as f64,
                accel: 0.0,
                size: m(a.size),
                aut: a.aut,
                turn_signal: TurnSignal::Off,
                kind: if a.pedestrian { AgentKind::Pedestrian } else { AgentKind::Car },
            })
            .collect();
        Snapshot::new(network, agents, 0.0, WorldConfig::default()).unwrap()
    }

    /// Reservation in cm: body plus v²/(2·5) braking, pedestrians ±50 cm.
    pub fn reservation(&self, i: usize) -> (i64, i64) {
        let a = &self.agents[i];
        let (lo, hi) = if a.pedestrian {
            (a.pos - 50, a.pos + 50)
        } else {
            (a.pos - a.size, a.pos + a.speed * a.speed * 10)
        };
        let lo = lo.clamp(0, self.len);
        (lo, hi.clamp(lo, self.len))
    }

    fn obstacles(&self, lane: usize) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let (lo, hi) = self.reservation(i);
            if hi <= lo {
                continue;
            }
            if a.lane == lane {
                out.push((lo, hi));
            } else if let (Some((blo, bhi)), Some(mine)) = (self.inter[a.lane], self.inter[lane]) {
                if lo.max(blo) < hi.min(bhi) {
                    out.push(mine);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum LenV {
    Cm(i64),
    Size(usize, i64),
}

#[derive(Debug, Clone)]
pub enum F {
    Free,
    Re(usize),
    Aut(usize, bool),
    Sign(SignKind),
    Crossing,
    Len(Cmp, LenV),
    Sg(usize),
    Not(Box<F>),
    And(Box<F>, Box<F>),
    Or(Box<F>, Box<F>),
    Chop(Box<F>, Box<F>),
}

fn cm_text(cm: i64) -> String {
    format!("{}", m(cm))
}

impl F {
    pub fn render(&self) -> String {
        match self {
            F::Free => "free".into(),
            F::Re(i) => format!("re({})", agent_name(*i)),
            F::Aut(i, b) => format!("aut({})={}", agent_name(*i), *b as u8),
            F::Sign(k) => format!("sign({})", k.as_str()),
            F::Crossing => "crossing".into(),
            F::Len(c, LenV::Cm(v)) => format!("len {} {}", c.as_str(), cm_text(*v)),
            F::Len(c, LenV::Size(i, 0)) => format!("len {} size({})", c.as_str(), agent_name(*i)),
            F::Len(c, LenV::Size(i, mg)) => format!("len {} size({}) + {}", c.as_str(), agent_name(*i), cm_text(*mg)),
            F::Sg(i) => format!("sg({})", agent_name(*i)),
            F::Not(a) => format!("!({})", a.render()),
            F::And(a, b) => format!("({} & {})", a.render(), b.render()),
            F::Or(a, b) => format!("({} | {})", a.render(), b.render()),
            F::Chop(a, b) => format!("({} ; {})", a.render(), b.render()),
        }
    }
}

fn cmp_int(c: Cmp, a: i64, b: i64) -> bool {
    match c {
        Cmp::Lt => a < b,
        Cmp::Le => a <= b,
        Cmp::Eq => a == b,
        Cmp::Ge => a >= b,
        Cmp::Gt => a > b,
    }
}

pub struct GridEval<'a> {
    scene: &'a RawScene,
    lane: usize,
    obstacles: Vec<(i64, i64)>,
    memo: HashMap<(usize, i64, i64), bool>,
}

impl<'a> GridEval<'a> {
    pub fn new(scene: &'a RawScene, lane: usize) -> Self {
        GridEval {
            scene,
            lane,
            obstacles: scene.obstacles(lane),
            memo: HashMap::new(),
        }
    }

    fn free(&self, lo: i64, hi: i64) -> bool {
        lo == hi || self.obstacles.iter().all(|&(a, b)| a.max(lo) >= b.min(hi))
    }

    pub fn eval(&mut self, f: &F, lo: i64, hi: i64) -> bool {
        let s = self.scene;
        match f {
            F::Free => self.free(lo, hi),
            F::Re(i) => {
                let r = s.reservation(*i);
                s.agents[*i].lane == self.lane && r.0 < r.1 && lo < hi && r == (lo, hi)
            }
            F::Aut(i, b) => s.agents[*i].aut == *b,
            F::Sign(k) => s.signs.iter().any(|&(l, p, kk)| l == self.lane && kk == *k && lo <= p && p <= hi),
            F::Crossing => s.crossings.iter().any(|&(l, a, b)| l == self.lane && a <= hi && lo <= b),
            F::Len(c, v) => {
                let rhs = match v {
                    LenV::Cm(x) => *x,
                    LenV::Size(i, mg) => s.agents[*i].size + mg,
                };
                cmp_int(*c, hi - lo, rhs)
            }
            F::Sg(i) => self.free(lo, hi) && hi - lo >= s.agents[*i].size,
            F::Not(a) => !self.eval(a, lo, hi),
            F::And(a, b) => self.eval(a, lo, hi) && self.eval(b, lo, hi),
            F::Or(a, b) => self.eval(a, lo, hi) || self.eval(b, lo, hi),
            F::Chop(a, b) => {
                let key = (f as *const F as usize, lo, hi);
                if let Some(&v) = self.memo.get(&key) {
                    return v;
                }
                let v = (lo..=hi).any(|mid| self.eval(a, lo, mid) && self.eval(b, mid, hi));
                self.memo.insert(key, v);
                v
            }
        }
    }
}

fn grid(rng: &mut ChaCha8Rng, lo_cm: i64, hi_cm: i64) -> i64 {
    rng.gen_range(lo_cm / 10..=hi_cm / 10) * 10
}

pub fn random_scene(rng: &mut ChaCha8Rng) -> RawScene {
    let lanes = rng.gen_range(1..=3);
    let len = 2000;
    let inter = (0..lanes)
        .map(|_| {
            (lanes > 1 && rng.gen_bool(0.8)).then(|| {
                let lo = grid(rng, 500, 1300);
                (lo, lo + grid(rng, 200, 400))
            })
        })
        .collect();
    let signs = (0..rng.gen_range(0..=2))
        .map(|_| {
            let kind = if rng.gen_bool(0.5) { SignKind::Stop } else { SignKind::GiveWay };
            (rng.gen_range(0..lanes), grid(rng, 0, len), kind)
        })
        .collect();
    let crossings = (0..rng.gen_range(0..=1))
        .map(|_| {
            let lo = grid(rng, 0, 1700);
            (rng.gen_range(0..lanes), lo, lo + grid(rng, 100, 300))
        })
        .collect();
    let agents = (0..rng.gen_range(0..=5))
        .map(|_| RawAgent {
            lane: rng.gen_range(0..lanes),
            pos: grid(rng, 0, len),
            size: grid(rng, 50, 450),
            speed: rng.gen_range(0..=4),
            aut: rng.gen_bool(0.5),
            pedestrian: rng.gen_bool(0.2),
        })
        .collect();
    RawScene {
        lanes,
        len,
        inter,
        signs,
        crossings,
        agents,
    }
}

fn random_cmp(rng: &mut ChaCha8Rng) -> Cmp {
    [Cmp::Lt, Cmp::Le, Cmp::Eq, Cmp::Ge, Cmp::Gt][rng.gen_range(0..5)]
}

fn random_atom(rng: &mut ChaCha8Rng, n_agents: usize) -> F {
    let pick = if n_agents == 0 { rng.gen_range(0..4) } else { rng.gen_range(0..8) };
    match pick {
        0 => F::Free,
        1 => F::Len(random_cmp(rng), LenV::Cm(grid(rng, 0, 300))),
        2 => F::Crossing,
        3 => F::Sign(if rng.gen_bool(0.7) { SignKind::Stop } else { SignKind::GiveWay }),
        4 => F::Re(rng.gen_range(0..n_agents)),
        5 => F::Aut(rng.gen_range(0..n_agents), rng.gen_bool(0.5)),
        6 => F::Sg(rng.gen_range(0..n_agents)),
        _ => F::Len(random_cmp(rng), LenV::Size(rng.gen_range(0..n_agents), grid(rng, 0, 100))),
    }
}

/// Random formula of nesting depth at most `depth`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, n_agents: usize) -> F {
    if depth == 0 || rng.gen_bool(0.25) {
        return random_atom(rng, n_agents);
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_formula(rng, depth - 1, n_agents));
    match rng.gen_range(0..7) {
        0 => F::Not(sub(rng)),
        1 => F::And(sub(rng), sub(rng)),
        2 => F::Or(sub(rng), sub(rng)),
        _ => F::Chop(sub(rng), sub(rng)),
    }
}

/// Random view of at most 3 m on a random lane, as (lane, lo, hi) in cm.
pub fn random_view(rng: &mut ChaCha8Rng, scene: &RawScene) -> (usize, i64, i64) {
    let lane = rng.gen_range(0..scene.lanes);
    let lo = grid(rng, 0, scene.len);
    let hi = (lo + grid(rng, 0, 300)).min(scene.len);
    (lane, lo, hi)
}

pub fn library_view(lane: usize, lo: i64, hi: i64) -> View {
    View::new(lane_name(lane), m(lo), m(hi))
}
