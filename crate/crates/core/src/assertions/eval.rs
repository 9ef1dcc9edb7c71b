use std::collections::BTreeMap;

use crate::spatial::{evaluate, Formula};
use crate::traffic::{Agent, Interval, RoadNetwork, Snapshot, View};

use super::predicate::{AgentRef, Pred, Term, ViewSpec};

/// Everything a pointwise predicate can look at in one step.
pub struct StepContext<'a> {
    pub step: usize,
    pub time: f64,
    pub agents: &'a [Agent],
    pub network: &'a RoadNetwork,
    pub observations: &'a BTreeMap<String, bool>,
    pub location: &'a str,
    pub loc_time: f64,
    pub ego: &'a str,
    /// Required only by `usl(..)`.
    pub snapshot: Option<&'a Snapshot>,
}

impl StepContext<'_> {
    fn agent(&self, a: &AgentRef) -> Option<&Agent> {
        let id = a.resolve(self.ego);
        self.agents.iter().find(|x| x.id == id)
    }
}

fn body(a: &Agent) -> Interval {
    Interval::new(a.pos - a.size, a.pos)
}

fn nearest(a: &Agent, points: impl Iterator<Item = f64>) -> Option<f64> {
    points
        .map(|p| p - a.pos)
        .min_by(|x, y| x.abs().total_cmp(&y.abs()).then(y.total_cmp(x)))
}

/// Value of a numeric term, `None` when an agent it refers to is not live
/// or the referenced road element does not exist.
pub fn term_value(t: &Term, ctx: &StepContext) -> Option<f64> {
    Some(match t {
        Term::Num(v) => *v,
        Term::Time => ctx.time,
        Term::Step => ctx.step as f64,
        Term::LocTime => ctx.loc_time,
        Term::Speed(a) => ctx.agent(a)?.speed,
        Term::Pos(a) => ctx.agent(a)?.pos,
        Term::Accel(a) => ctx.agent(a)?.accel,
        Term::Size(a) => ctx.agent(a)?.size,
        Term::DistToSign(a, kind) => {
            let ag = ctx.agent(a)?;
            let pts = ctx
                .network
                .signs
                .iter()
                .filter(|s| s.kind == *kind && s.lane == ag.lane)
                .map(|s| s.pos);
            nearest(ag, pts)?
        }
        Term::DistToCrossing(a) => {
            let ag = ctx.agent(a)?;
            let pts = ctx.network.crossings.iter().filter(|c| c.lane == ag.lane).map(|c| c.lo);
            nearest(ag, pts)?
        }
        Term::DistTo(a, b) => {
            let (x, y) = (ctx.agent(a)?, ctx.agent(b)?);
            if x.lane != y.lane {
                return None;
            }
            y.pos - y.size - x.pos
        }
        Term::MinGap(a) => {
            let x = ctx.agent(a)?;
            let bx = body(x);
            ctx.agents
                .iter()
                .filter(|y| y.id != x.id && y.lane == x.lane)
                .map(|y| {
                    let by = body(y);
                    if by.lo >= bx.lo {
                        by.lo - bx.hi
                    } else {
                        bx.lo - by.hi
                    }
                })
                .fold(f64::INFINITY, f64::min)
        }
        Term::Add(a, b) => term_value(a, ctx)? + term_value(b, ctx)?,
        Term::Sub(a, b) => term_value(a, ctx)? - term_value(b, ctx)?,
    })
}

fn rename_ego(f: &Formula, ego: &str) -> Formula {
    f.rename_agents(&|a: &str| if a == "ego" { ego.to_string() } else { a.to_string() })
}

/// Lane view described by `spec` for agent `ego`.
pub fn resolve_view(spec: &ViewSpec, snap: &Snapshot, ego: &str) -> Result<View, String> {
    let agent = snap.agent(ego).ok_or_else(|| format!("agent '{ego}' is not live"))?;
    let res = snap
        .reservation(ego)
        .ok_or_else(|| format!("agent '{ego}' has no reservation"))?;
    let len = snap.network.lane_length;
    let clip = |lo: f64, hi: f64| {
        let lo = lo.clamp(0.0, len);
        View::new(agent.lane.clone(), lo, hi.clamp(lo, len))
    };
    Ok(match spec {
        ViewSpec::Reach(h) => clip(res.interval.lo, res.interval.hi + h.unwrap_or(agent.size)),
        ViewSpec::Ahead(h) => crate::traffic::view_ahead(snap, ego, *h).map_err(|e| e.to_string())?,
        ViewSpec::Front(a, b) => clip(agent.pos + a, agent.pos + b),
        ViewSpec::Reservation => clip(res.interval.lo, res.interval.hi),
        ViewSpec::Lane => clip(0.0, len),
    })
}

/// Evaluates a pointwise predicate. `once` and `prev` are rejected.
pub fn eval_point(p: &Pred, ctx: &StepContext) -> Result<bool, String> {
    Ok(match p {
        Pred::Const(b) => *b,
        Pred::Rel(a, op, b) => match (term_value(a, ctx), term_value(b, ctx)) {
            (Some(x), Some(y)) => op.holds(x, y),
            _ => false,
        },
        Pred::LaneIs(a, lane, eq) => ctx.agent(a).is_some_and(|x| (x.lane == *lane) == *eq),
        Pred::SignalIs(a, s, eq) => ctx.agent(a).is_some_and(|x| (x.turn_signal == *s) == *eq),
        Pred::Aut(a) => ctx.agent(a).is_some_and(|x| x.aut),
        Pred::InIntersection(a) => ctx.agent(a).is_some_and(|x| {
            ctx.network
                .intersection_on(&x.lane)
                .is_some_and(|iv| body(x).overlaps_interior(&iv))
        }),
        Pred::InCrossing(a) => ctx.agent(a).is_some_and(|x| {
            ctx.network
                .crossings
                .iter()
                .any(|c| c.lane == x.lane && body(x).overlaps_interior(&c.interval()))
        }),
        Pred::Obs(o) => *ctx
            .observations
            .get(o)
            .ok_or_else(|| format!("observation '{o}' is not recorded"))?,
        Pred::At(l) => ctx.location == l,
        Pred::Usl { formula, view, .. } => {
            let snap = ctx.snapshot.ok_or("no snapshot available for usl(..)")?;
            let f = rename_ego(formula, ctx.ego);
            // formulas about agents that have left the scene do not hold
            if snap.agent(ctx.ego).is_none() || f.agents().iter().any(|a| snap.agent(a).is_none()) {
                return Ok(false);
            }
            let v = resolve_view(view, snap, ctx.ego)?;
            evaluate(snap, &v, &f).map_err(|e| e.to_string())?
        }
        Pred::Not(a) => !eval_point(a, ctx)?,
        Pred::And(a, b) => eval_point(a, ctx)? && eval_point(b, ctx)?,
        Pred::Or(a, b) => eval_point(a, ctx)? || eval_point(b, ctx)?,
        Pred::Once(_) | Pred::Prev(_) => return Err(format!("'{p}' needs the trace history")),
    })
}
