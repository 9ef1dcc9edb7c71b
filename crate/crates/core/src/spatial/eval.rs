use std::collections::HashMap;

use thiserror::Error;

use crate::traffic::{free_intervals, Interval, Snapshot, TrafficError, View, EPS};

use super::ast::{Formula, LenValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("formula references unknown agent '{0}'")]
    UnknownAgent(String),
    #[error(transparent)]
    View(#[from] TrafficError),
}

/// Decides `formula` on `view`.
///
/// Chop is decided by trying every split point returned by
/// [`candidate_chop_points`] plus the midpoint of every pair of adjacent
/// candidates; between two adjacent candidates no atom of either operand
/// changes truth value.
pub fn evaluate(snapshot: &Snapshot, view: &View, formula: &Formula) -> Result<bool, EvalError> {
    snapshot.check_view(view)?;
    for a in formula.agents() {
        if snapshot.agent(a).is_none() {
            return Err(EvalError::UnknownAgent(a.to_string()));
        }
    }
    let mut ev = Evaluator {
        snap: snapshot,
        lane: &view.lane,
        memo: HashMap::new(),
        offsets: HashMap::new(),
    };
    Ok(ev.eval(formula, view.extent))
}

/// Split points at which the truth of an atom inside `formula` can change
/// on `view`: the view ends, occupancy/sign/crossing boundaries, and every
/// such point shifted by each signed sum of the formula's length
/// constants. Sorted, clipped to the view and deduplicated within 1e-9.
pub fn candidate_chop_points(
    snapshot: &Snapshot,
    view: &View,
    formula: &Formula,
) -> Result<Vec<f64>, EvalError> {
    snapshot.check_view(view)?;
    let offsets = length_offsets(snapshot, formula, view.extent.len());
    Ok(candidates(snapshot, &view.lane, view.extent, &offsets))
}

fn resolve_len(snapshot: &Snapshot, v: &LenValue) -> f64 {
    match v {
        LenValue::Meters(m) => *m,
        LenValue::SizeOf { agent, margin } => {
            snapshot.agent(agent).map_or(f64::NAN, |a| a.size) + margin
        }
    }
}

/// All signed subset sums of the formula's length constants, bounded by
/// `span` in magnitude.
fn length_offsets(snapshot: &Snapshot, formula: &Formula, span: f64) -> Vec<f64> {
    let mut consts = Vec::new();
    formula.visit(&mut |f| {
        if let Formula::Len(_, v) = f {
            let x = resolve_len(snapshot, v);
            if x.is_finite() && x > EPS {
                consts.push(x);
            }
        }
    });
    let mut sums = vec![0.0];
    for c in consts {
        let mut next = sums.clone();
        for s in &sums {
            for cand in [s + c, s - c] {
                if cand.abs() <= span + EPS {
                    next.push(cand);
                }
            }
        }
        dedup_sorted(&mut next);
        sums = next;
    }
    sums
}

fn dedup_sorted(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|b, a| (*b - *a).abs() <= EPS);
}

fn candidates(snapshot: &Snapshot, lane: &str, ext: Interval, offsets: &[f64]) -> Vec<f64> {
    let mut base = vec![ext.lo, ext.hi];
    base.extend(
        snapshot
            .static_points(lane)
            .into_iter()
            .filter(|p| ext.contains_point(*p)),
    );
    let mut pts = Vec::with_capacity(base.len() * offsets.len());
    for p in &base {
        for o in offsets {
            let x = p + o;
            if x >= ext.lo - EPS && x <= ext.hi + EPS {
                pts.push(x.clamp(ext.lo, ext.hi));
            }
        }
    }
    dedup_sorted(&mut pts);
    pts
}

struct Evaluator<'a> {
    snap: &'a Snapshot,
    lane: &'a str,
    memo: HashMap<(usize, u64, u64), bool>,
    offsets: HashMap<usize, Vec<f64>>,
}

impl Evaluator<'_> {
    fn eval(&mut self, f: &Formula, ext: Interval) -> bool {
        match f {
            Formula::Free => ext.is_degenerate() || self.free(ext),
            Formula::Re(agent) => match self.snap.reservation(agent) {
                Some(r) if r.lane == self.lane => {
                    !r.interval.is_degenerate() && !ext.is_degenerate() && r.interval.approx_eq(&ext)
                }
                _ => false,
            },
            Formula::Aut(agent, flag) => self.snap.agent(agent).is_some_and(|a| a.aut == *flag),
            Formula::SignAhead(kind) => self
                .snap
                .network
                .signs
                .iter()
                .any(|s| s.kind == *kind && s.lane == self.lane && ext.contains_point(s.pos)),
            Formula::CrossingAhead => self
                .snap
                .network
                .crossings
                .iter()
                .any(|c| c.lane == self.lane && c.interval().touches(&ext)),
            Formula::Len(cmp, v) => cmp.holds(ext.len(), resolve_len(self.snap, v)),
            Formula::Not(a) => !self.eval(a, ext),
            Formula::And(a, b) => self.eval(a, ext) && self.eval(b, ext),
            Formula::Or(a, b) => self.eval(a, ext) || self.eval(b, ext),
            Formula::Chop(a, b) => {
                let key = (f as *const Formula as usize, ext.lo.to_bits(), ext.hi.to_bits());
                if let Some(&v) = self.memo.get(&key) {
                    return v;
                }
                let v = self.chop(f, a, b, ext);
                self.memo.insert(key, v);
                v
            }
        }
    }

    fn free(&self, ext: Interval) -> bool {
        let view = View::new(self.lane, ext.lo, ext.hi);
        match free_intervals(self.snap, &view) {
            Ok(ivs) => ivs.len() == 1 && ivs[0].approx_eq(&ext),
            Err(_) => false,
        }
    }

    fn chop(&mut self, node: &Formula, left: &Formula, right: &Formula, ext: Interval) -> bool {
        let id = node as *const Formula as usize;
        let span = self.snap.network.lane_length;
        let offsets = self
            .offsets
            .entry(id)
            .or_insert_with(|| length_offsets(self.snap, node, span))
            .clone();
        let pts = candidates(self.snap, self.lane, ext, &offsets);
        let mut splits = Vec::with_capacity(pts.len() * 2);
        for (i, p) in pts.iter().enumerate() {
            splits.push(*p);
            if let Some(q) = pts.get(i + 1) {
                splits.push((p + q) / 2.0);
            }
        }
        splits.into_iter().any(|m| {
            self.eval(left, Interval::new(ext.lo, m)) && self.eval(right, Interval::new(m, ext.hi))
        })
    }
}
