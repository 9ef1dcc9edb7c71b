//! Longitudinal road-and-traffic world model.
//!
//! Every lane is a 1-D coordinate axis `[0, lane_length]`. Agents occupy a
//! reservation on their lane: the vehicle body plus its braking envelope.
//! Reservations that reach into the intersection are projected onto the
//! intersection interval of every other lane crossing it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numerical tolerance for positions and lengths, in meters.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("unknown lane '{0}'")]
    UnknownLane(String),
    #[error("unknown agent '{0}'")]
    UnknownAgent(String),
    #[error("duplicate lane '{0}'")]
    DuplicateLane(String),
    #[error("duplicate agent '{0}'")]
    DuplicateAgent(String),
    #[error("{what}: [{lo}, {hi}] is not within [0, {len}]")]
    OutOfBounds { what: String, lo: f64, hi: f64, len: f64 },
    #[error("agent '{agent}': {reason}")]
    InvalidAgent { agent: String, reason: String },
}

/// Closed interval `[lo, hi]` in meters along a lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.len() <= EPS
    }

    pub fn clip(&self, lo: f64, hi: f64) -> Interval {
        let a = self.lo.clamp(lo, hi);
        let b = self.hi.clamp(lo, hi);
        Interval::new(a, b.max(a))
    }

    /// True when the interiors overlap by more than [`EPS`].
    pub fn overlaps_interior(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) + EPS < self.hi.min(other.hi)
    }

    pub fn contains_point(&self, x: f64) -> bool {
        x >= self.lo - EPS && x <= self.hi + EPS
    }

    /// Closed intersection test.
    pub fn touches(&self, other: &Interval) -> bool {
        self.lo <= other.hi + EPS && other.lo <= self.hi + EPS
    }

    pub fn approx_eq(&self, other: &Interval) -> bool {
        (self.lo - other.lo).abs() <= EPS && (self.hi - other.hi).abs() <= EPS
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignKind {
    Stop,
    #[serde(alias = "give-way")]
    GiveWay,
}

impl SignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignKind::Stop => "stop",
            SignKind::GiveWay => "give_way",
        }
    }

    pub fn parse(s: &str) -> Option<SignKind> {
        match s {
            "stop" => Some(SignKind::Stop),
            "give_way" | "give-way" => Some(SignKind::GiveWay),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sign {
    pub kind: SignKind,
    pub lane: String,
    pub pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneInterval {
    pub lane: String,
    pub lo: f64,
    pub hi: f64,
}

impl LaneInterval {
    pub fn interval(&self) -> Interval {
        Interval::new(self.lo, self.hi)
    }
}

/// Static scene: lanes, the shared intersection region, signs and crossings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub lanes: Vec<String>,
    pub lane_length: f64,
    /// Longitudinal extent of the intersection on each lane that crosses it.
    #[serde(default)]
    pub intersection: Vec<LaneInterval>,
    #[serde(default)]
    pub signs: Vec<Sign>,
    #[serde(default)]
    pub crossings: Vec<LaneInterval>,
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<(), TrafficError> {
        for (i, lane) in self.lanes.iter().enumerate() {
            if self.lanes[..i].contains(lane) {
                return Err(TrafficError::DuplicateLane(lane.clone()));
            }
        }
        let check = |what: &str, lane: &str, lo: f64, hi: f64| {
            if !self.has_lane(lane) {
                return Err(TrafficError::UnknownLane(lane.to_string()));
            }
            if !(lo >= 0.0 && lo <= hi && hi <= self.lane_length) {
                return Err(TrafficError::OutOfBounds {
                    what: what.to_string(),
                    lo,
                    hi,
                    len: self.lane_length,
                });
            }
            Ok(())
        };
        for iv in &self.intersection {
            check("intersection", &iv.lane, iv.lo, iv.hi)?;
        }
        for s in &self.signs {
            check("sign", &s.lane, s.pos, s.pos)?;
        }
        for c in &self.crossings {
            check("crossing", &c.lane, c.lo, c.hi)?;
        }
        Ok(())
    }

    pub fn has_lane(&self, lane: &str) -> bool {
        self.lanes.iter().any(|l| l == lane)
    }

    pub fn intersection_on(&self, lane: &str) -> Option<Interval> {
        self.intersection
            .iter()
            .find(|iv| iv.lane == lane)
            .map(LaneInterval::interval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnSignal {
    #[default]
    Off,
    Left,
    Right,
}

impl TurnSignal {
    pub fn as_str(&self) -> &'static str {
        match self {
            TurnSignal::Off => "off",
            TurnSignal::Left => "left",
            TurnSignal::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Car,
    Cyclist,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: String,
    pub lane: String,
    /// Position of the front of the agent.
    pub pos: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub accel: f64,
    pub size: f64,
    #[serde(default)]
    pub aut: bool,
    #[serde(default)]
    pub turn_signal: TurnSignal,
    #[serde(default)]
    pub kind: AgentKind,
}

impl Agent {
    pub fn validate(&self, network: &RoadNetwork) -> Result<(), TrafficError> {
        if !network.has_lane(&self.lane) {
            return Err(TrafficError::UnknownLane(self.lane.clone()));
        }
        let bad = |reason: String| TrafficError::InvalidAgent {
            agent: self.id.clone(),
            reason,
        };
        if !(self.size > 0.0) {
            return Err(bad(format!("size must be > 0, got {}", self.size)));
        }
        if !(self.speed >= 0.0) {
            return Err(bad(format!("speed must be >= 0, got {}", self.speed)));
        }
        if !(self.pos >= 0.0 && self.pos <= network.lane_length) {
            return Err(bad(format!(
                "pos {} outside [0, {}]",
                self.pos, network.lane_length
            )));
        }
        Ok(())
    }
}

/// Physical constants shared by reservation derivation and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Maximum braking deceleration, m/s².
    pub b_max: f64,
    /// Acceleration used when proceeding, m/s².
    pub a_max: f64,
    pub v_max: f64,
    pub cruise_speed: f64,
    /// Longitudinal extent of a pedestrian's reservation.
    pub pedestrian_width: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            b_max: 5.0,
            a_max: 2.0,
            v_max: 15.0,
            cruise_speed: 10.0,
            pedestrian_width: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn braking_distance(&self, speed: f64) -> f64 {
        speed * speed / (2.0 * self.b_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub agent: String,
    pub lane: String,
    pub interval: Interval,
}

/// Lane window over which a spatial formula is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub lane: String,
    pub extent: Interval,
    pub owner: Option<String>,
}

impl View {
    pub fn new(lane: impl Into<String>, lo: f64, hi: f64) -> Self {
        View {
            lane: lane.into(),
            extent: Interval::new(lo, hi),
            owner: None,
        }
    }

    pub fn with_extent(&self, lo: f64, hi: f64) -> View {
        View {
            lane: self.lane.clone(),
            extent: Interval::new(lo, hi),
            owner: self.owner.clone(),
        }
    }
}

/// The road world at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub network: RoadNetwork,
    pub agents: Vec<Agent>,
    pub reservations: Vec<Reservation>,
    pub time: f64,
    pub config: WorldConfig,
    obstacles: BTreeMap<String, Vec<Interval>>,
}

impl Snapshot {
    pub fn new(
        network: RoadNetwork,
        agents: Vec<Agent>,
        time: f64,
        config: WorldConfig,
    ) -> Result<Snapshot, TrafficError> {
        network.validate()?;
        for (i, a) in agents.iter().enumerate() {
            a.validate(&network)?;
            if agents[..i].iter().any(|b| b.id == a.id) {
                return Err(TrafficError::DuplicateAgent(a.id.clone()));
            }
        }
        let mut snap = Snapshot {
            network,
            agents,
            reservations: Vec::new(),
            time,
            config,
            obstacles: BTreeMap::new(),
        };
        snap.reservations = derive_reservations(&snap);
        snap.obstacles = project_obstacles(&snap.network, &snap.reservations);
        Ok(snap)
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn reservation(&self, id: &str) -> Option<&Reservation> {
        self.reservations.iter().find(|r| r.agent == id)
    }

    /// Merged, sorted occupied intervals on `lane`, including intersection
    /// projections.
    pub fn obstacles(&self, lane: &str) -> &[Interval] {
        self.obstacles.get(lane).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn check_view(&self, view: &View) -> Result<(), TrafficError> {
        if !self.network.has_lane(&view.lane) {
            return Err(TrafficError::UnknownLane(view.lane.clone()));
        }
        let e = view.extent;
        if !(e.lo >= -EPS && e.lo <= e.hi && e.hi <= self.network.lane_length + EPS) {
            return Err(TrafficError::OutOfBounds {
                what: format!("view on '{}'", view.lane),
                lo: e.lo,
                hi: e.hi,
                len: self.network.lane_length,
            });
        }
        Ok(())
    }

    /// Points on `lane` where the truth of a spatial atom can change.
    pub fn static_points(&self, lane: &str) -> Vec<f64> {
        let mut pts = Vec::new();
        for iv in self.obstacles(lane) {
            pts.push(iv.lo);
            pts.push(iv.hi);
        }
        for r in self.reservations.iter().filter(|r| r.lane == lane) {
            pts.push(r.interval.lo);
            pts.push(r.interval.hi);
        }
        for s in self.network.signs.iter().filter(|s| s.lane == lane) {
            pts.push(s.pos);
        }
        for c in self.network.crossings.iter().filter(|c| c.lane == lane) {
            pts.push(c.lo);
            pts.push(c.hi);
        }
        pts
    }
}

/// Body plus braking envelope for every agent, clipped to the lane.
pub fn derive_reservations(snapshot: &Snapshot) -> Vec<Reservation> {
    let len = snapshot.network.lane_length;
    let cfg = &snapshot.config;
    snapshot
        .agents
        .iter()
        .map(|a| {
            let raw = match a.kind {
                AgentKind::Pedestrian => {
                    let half = cfg.pedestrian_width / 2.0;
                    Interval::new(a.pos - half, a.pos + half)
                }
                _ => Interval::new(a.pos - a.size, a.pos + cfg.braking_distance(a.speed)),
            };
            Reservation {
                agent: a.id.clone(),
                lane: a.lane.clone(),
                interval: raw.clip(0.0, len),
            }
        })
        .collect()
}

fn project_obstacles(
    network: &RoadNetwork,
    reservations: &[Reservation],
) -> BTreeMap<String, Vec<Interval>> {
    let mut map: BTreeMap<String, Vec<Interval>> = network
        .lanes
        .iter()
        .map(|l| (l.clone(), Vec::new()))
        .collect();
    for r in reservations {
        if r.interval.is_degenerate() {
            continue;
        }
        map.entry(r.lane.clone()).or_default().push(r.interval);
        let in_box = network
            .intersection_on(&r.lane)
            .is_some_and(|b| b.overlaps_interior(&r.interval));
        if in_box {
            for other in network.intersection.iter().filter(|iv| iv.lane != r.lane) {
                map.entry(other.lane.clone()).or_default().push(other.interval());
            }
        }
    }
    for ivs in map.values_mut() {
        *ivs = merge(std::mem::take(ivs));
    }
    map
}

fn merge(mut ivs: Vec<Interval>) -> Vec<Interval> {
    ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// Maximal sub-intervals of the view that overlap no occupied space.
pub fn free_intervals(snapshot: &Snapshot, view: &View) -> Result<Vec<Interval>, TrafficError> {
    snapshot.check_view(view)?;
    let ext = view.extent;
    let covered: Vec<Interval> = snapshot
        .obstacles(&view.lane)
        .iter()
        .filter(|o| o.overlaps_interior(&ext))
        .map(|o| o.clip(ext.lo, ext.hi))
        .collect();
    if ext.is_degenerate() {
        return Ok(if covered.is_empty() { vec![ext] } else { vec![] });
    }
    let mut out = Vec::new();
    let mut cursor = ext.lo;
    for c in &covered {
        if c.lo > cursor + EPS {
            out.push(Interval::new(cursor, c.lo));
        }
        cursor = cursor.max(c.hi);
    }
    if ext.hi > cursor + EPS {
        out.push(Interval::new(cursor, ext.hi));
    }
    Ok(out)
}

/// View on the ego's lane starting at the front of its reservation.
pub fn view_ahead(snapshot: &Snapshot, ego: &str, horizon: f64) -> Result<View, TrafficError> {
    let r = snapshot
        .reservation(ego)
        .ok_or_else(|| TrafficError::UnknownAgent(ego.to_string()))?;
    let len = snapshot.network.lane_length;
    let lo = r.interval.hi.min(len);
    Ok(View {
        lane: r.lane.clone(),
        extent: Interval::new(lo, (lo + horizon.max(0.0)).min(len)),
        owner: Some(ego.to_string()),
    })
}
