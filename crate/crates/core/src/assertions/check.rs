use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predicate::Pred;
use super::spec::{Assertion, Flavor, Kind};
use super::store::TraceStore;
use super::AssertionError;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Vacuous => "vacuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Reference point the failing step belongs to (`None` for invariants).
    pub reference: Option<usize>,
    pub step: usize,
    pub time: f64,
    /// Values of the condition's numeric terms at the failing step.
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub name: String,
    pub kind: Kind,
    pub verdict: Verdict,
    pub reference_points: Vec<usize>,
    pub failures: Vec<Failure>,
    /// Reference points whose window was cut off by the trace boundary.
    pub clipped: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteError {
    pub assertion: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub results: Vec<AssertionResult>,
    pub errors: Vec<SuiteError>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.summary.fail == 0 && self.summary.errors == 0
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<7} {} ({}) reference points: {}",
                r.verdict.as_str().to_uppercase(),
                r.name,
                r.kind.as_str(),
                r.reference_points.len()
            );
            for f in r.failures.iter().take(10) {
                let vals: Vec<String> = f
                    .values
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.map_or("n/a".to_string(), |x| x.to_string())))
                    .collect();
                let at = f.reference.map_or(String::new(), |r| format!(" (reference {r})"));
                let _ = writeln!(out, "        step {} t={}{at}: {}", f.step, f.time, vals.join(", "));
            }
            if r.failures.len() > 10 {
                let _ = writeln!(out, "        ... {} more failing steps", r.failures.len() - 10);
            }
            if !r.clipped.is_empty() {
                let _ = writeln!(out, "        windows clipped at reference points {:?}", r.clipped);
            }
        }
        for e in &self.errors {
            let _ = writeln!(out, "ERROR   {}: {}", e.assertion, e.message);
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} pass / {} fail / {} vacuous / {} error",
            s.pass, s.fail, s.vacuous, s.errors
        );
        out
    }
}

/// Steps where `trigger` becomes true (step 0 counts when true), or every
/// true step when `all` is set.
pub fn find_reference_points(store: &TraceStore, trigger: &Pred, all: bool) -> Result<Vec<usize>, AssertionError> {
    let c = store.column(trigger)?;
    Ok(rising_edges(&c, all))
}

pub fn rising_edges(c: &[bool], all: bool) -> Vec<usize> {
    (0..c.len()).filter(|&k| c[k] && (all || k == 0 || !c[k - 1])).collect()
}

fn failure(store: &TraceStore, a: &Assertion, reference: Option<usize>, step: usize) -> Failure {
    let values = a
        .condition
        .terms()
        .iter()
        .map(|t| (t.to_string(), store.term_at(t, step)))
        .collect();
    Failure {
        reference,
        step,
        time: store.time(step),
        values,
    }
}

/// First index in `[lo, hi)` where the monotone predicate turns false.
fn partition(mut lo: usize, mut hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Half-open step range `[lo, hi)` covered by the window of reference `r`
/// and whether the window reaches past the trace.
pub fn window_range(store: &TraceStore, kind: Kind, flavor: Flavor, w: f64, r: usize) -> (usize, usize, bool) {
    let n = store.len();
    let key = |k: usize| match flavor {
        Flavor::Temporal => store.time(k),
        Flavor::Physical => store.arc_length(k),
    };
    let at = key(r);
    match kind {
        Kind::PreCondition => {
            let lo = partition(0, r, |k| key(k) < at - w - TIME_EPS);
            (lo, r, at - w < key(0) - TIME_EPS)
        }
        Kind::PostCondition => {
            let hi = partition(r + 1, n, |k| key(k) <= at + w + TIME_EPS);
            (r + 1, hi, at + w > key(n - 1) + TIME_EPS)
        }
        _ => (r, r + 1, false),
    }
}

pub fn check_assertion(store: &TraceStore, a: &Assertion) -> Result<AssertionResult, AssertionError> {
    a.validate().map_err(AssertionError::Schema)?;
    store.validate(&a.condition)?;
    if let Some(t) = &a.trigger {
        store.validate(t)?;
    }
    let cond = store.column(&a.condition)?;
    let failing: Vec<usize> = (0..cond.len()).filter(|&k| !cond[k]).collect();
    let mut failures = Vec::new();
    let mut clipped = Vec::new();
    let refs = match &a.trigger {
        None => {
            failures.extend(failing.iter().map(|&k| failure(store, a, None, k)));
            Vec::new()
        }
        Some(t) => {
            let refs = find_reference_points(store, t, a.all_edges)?;
            for &r in &refs {
                let (lo, hi, clip) = match a.window {
                    Some(w) => window_range(store, a.kind, a.flavor, w, r),
                    None => (r, r + 1, false),
                };
                if clip {
                    clipped.push(r);
                }
                let from = failing.partition_point(|&k| k < lo);
                let to = failing.partition_point(|&k| k < hi);
                failures.extend(failing[from..to].iter().map(|&k| failure(store, a, Some(r), k)));
            }
            refs
        }
    };
    let verdict = if a.kind != Kind::Invariant && refs.is_empty() {
        Verdict::Vacuous
    } else if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(AssertionResult {
        name: a.name.clone(),
        kind: a.kind,
        verdict,
        reference_points: refs,
        failures,
        clipped,
    })
}

/// Checks every assertion independently; a failing evaluation is reported
/// and does not stop the others.
pub fn check_suite(store: &TraceStore, assertions: &[Assertion]) -> SuiteReport {
    let outcomes: Vec<_> = assertions.par_iter().map(|a| (a, check_assertion(store, a))).collect();
    let mut results = Vec::new();
    let mut errors = Vec::new();
    let mut summary = Summary::default();
    for (a, o) in outcomes {
        match o {
            Ok(r) => {
                match r.verdict {
                    Verdict::Pass => summary.pass += 1,
                    Verdict::Fail => summary.fail += 1,
                    Verdict::Vacuous => summary.vacuous += 1,
                }
                results.push(r);
            }
            Err(e) => {
                summary.errors += 1;
                errors.push(SuiteError {
                    assertion: a.name.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    SuiteReport { results, errors, summary }
}
