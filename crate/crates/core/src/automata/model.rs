use serde::{Deserialize, Serialize};

use crate::lex::{Cursor, ParseError, Tok};
use crate::spatial::Cmp;

use super::dbm::{bound, DbmConstraint};
use super::AutomataError;

/// `x ~ c` or `x - y ~ c` over clock indices into [`TimedAutomaton::clocks`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClockConstraint {
    pub left: usize,
    pub right: Option<usize>,
    pub cmp: Cmp,
    pub constant: i64,
}

impl ClockConstraint {
    pub fn is_diagonal(&self) -> bool {
        self.right.is_some()
    }

    pub fn is_upper_bound(&self) -> bool {
        self.right.is_none() && matches!(self.cmp, Cmp::Lt | Cmp::Le)
    }

    /// DBM atoms (1-based clock indices) equivalent to this constraint.
    pub fn to_dbm(&self) -> Vec<DbmConstraint> {
        let i = self.left + 1;
        let j = self.right.map_or(0, |r| r + 1);
        let c = self.constant;
        let upper = |strict| DbmConstraint { i, j, bound: bound(c, strict) };
        let lower = |strict| DbmConstraint { i: j, j: i, bound: bound(-c, strict) };
        match self.cmp {
            Cmp::Lt => vec![upper(true)],
            Cmp::Le => vec![upper(false)],
            Cmp::Eq => vec![upper(false), lower(false)],
            Cmp::Ge => vec![lower(false)],
            Cmp::Gt => vec![lower(true)],
        }
    }

    /// Evaluates on clock values expressed in units of `1/scale` ticks.
    pub fn holds_scaled(&self, vals: &[i64], scale: i64) -> bool {
        let lhs = vals[self.left] - self.right.map_or(0, |r| vals[r]);
        self.cmp.holds_int(lhs, self.constant * scale)
    }

    pub fn render(&self, clocks: &[String]) -> String {
        match self.right {
            Some(r) => format!("{} - {} {} {}", clocks[self.left], clocks[r], self.cmp, self.constant),
            None => format!("{} {} {}", clocks[self.left], self.cmp, self.constant),
        }
    }
}

pub fn dbm_constraints(cs: &[ClockConstraint]) -> Vec<DbmConstraint> {
    cs.iter().flat_map(ClockConstraint::to_dbm).collect()
}

/// Observation literal: the observation at `index` must equal `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObsLiteral {
    pub index: usize,
    pub value: bool,
}

/// Valuation of the observation alphabet as a bit set.
pub type Valuation = u64;

pub fn literals_hold(lits: &[ObsLiteral], v: Valuation) -> bool {
    lits.iter().all(|l| ((v >> l.index) & 1 == 1) == l.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    #[serde(default)]
    pub invariant: Vec<ClockConstraint>,
    /// Longitudinal command label used by the simulator's action table.
    #[serde(default)]
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub guard: Vec<ClockConstraint>,
    pub observe: Vec<ObsLiteral>,
    pub action: String,
    pub resets: Vec<usize>,
}

/// Duration bounds of a behaviour-diagram step, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub name: String,
    pub location: usize,
    pub min_duration: f64,
    pub max_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAutomaton {
    pub name: String,
    /// Seconds per integer clock tick.
    pub time_unit: f64,
    pub clocks: Vec<String>,
    pub observations: Vec<String>,
    pub locations: Vec<Location>,
    pub initial: usize,
    pub edges: Vec<Edge>,
    /// Present when compiled from a behaviour diagram.
    #[serde(default)]
    pub steps: Vec<StepInfo>,
}

pub const MAX_OBSERVATIONS: usize = 20;

impl TimedAutomaton {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn observation_index(&self, name: &str) -> Option<usize> {
        self.observations.iter().position(|o| o == name)
    }

    pub fn clock_index(&self, name: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c == name)
    }

    /// Largest constant in any guard or invariant.
    pub fn max_constant(&self) -> i64 {
        let inv = self.locations.iter().flat_map(|l| &l.invariant);
        let grd = self.edges.iter().flat_map(|e| &e.guard);
        inv.chain(grd).map(|c| c.constant.abs()).max().unwrap_or(0)
    }

    pub fn has_diagonals(&self) -> bool {
        let inv = self.locations.iter().flat_map(|l| &l.invariant);
        let grd = self.edges.iter().flat_map(|e| &e.guard);
        inv.chain(grd).any(ClockConstraint::is_diagonal)
    }

    pub fn diagonal_constraints(&self) -> Vec<ClockConstraint> {
        let mut out: Vec<ClockConstraint> = Vec::new();
        let inv = self.locations.iter().flat_map(|l| &l.invariant);
        let grd = self.edges.iter().flat_map(|e| &e.guard);
        for c in inv.chain(grd).filter(|c| c.is_diagonal()) {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), AutomataError> {
        let bad = |m: String| Err(AutomataError::Invalid(m));
        if self.locations.is_empty() {
            return bad("automaton has no locations".into());
        }
        if self.initial >= self.locations.len() {
            return bad("initial location out of range".into());
        }
        if self.observations.len() > MAX_OBSERVATIONS {
            return bad(format!("at most {MAX_OBSERVATIONS} observations are supported"));
        }
        if !(self.time_unit > 0.0) {
            return bad("time unit must be positive".into());
        }
        for (i, l) in self.locations.iter().enumerate() {
            if self.locations[..i].iter().any(|m| m.name == l.name) {
                return bad(format!("duplicate location '{}'", l.name));
            }
            for c in &l.invariant {
                self.check_clock(c)?;
                if !c.is_upper_bound() {
                    return bad(format!(
                        "invariant of '{}' must be an upper bound, got '{}'",
                        l.name,
                        c.render(&self.clocks)
                    ));
                }
            }
        }
        for (i, c) in self.clocks.iter().enumerate() {
            if self.clocks[..i].contains(c) {
                return bad(format!("duplicate clock '{c}'"));
            }
        }
        for (i, o) in self.observations.iter().enumerate() {
            if self.observations[..i].contains(o) {
                return bad(format!("duplicate observation '{o}'"));
            }
        }
        for e in &self.edges {
            if e.source >= self.locations.len() || e.target >= self.locations.len() {
                return bad(format!("edge '{}' references a missing location", e.action));
            }
            for c in &e.guard {
                self.check_clock(c)?;
            }
            if e.resets.iter().any(|&r| r >= self.clocks.len()) {
                return bad(format!("edge '{}' resets an undeclared clock", e.action));
            }
            if e.observe.iter().any(|l| l.index >= self.observations.len()) {
                return bad(format!("edge '{}' observes an undeclared symbol", e.action));
            }
        }
        Ok(())
    }

    fn check_clock(&self, c: &ClockConstraint) -> Result<(), AutomataError> {
        let n = self.clocks.len();
        if c.left >= n || c.right.is_some_and(|r| r >= n) {
            return Err(AutomataError::Invalid("constraint references an undeclared clock".into()));
        }
        Ok(())
    }

    pub fn edges_from(&self, loc: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.source == loc)
    }
}

/// Parses a conjunction of clock constraints, e.g. `x >= 2 & x - y < 3`.
/// The empty string is the trivially true guard.
pub fn parse_clock_constraints(text: &str, clocks: &[String]) -> Result<Vec<ClockConstraint>, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut out = Vec::new();
    if matches!(cur.peek(), Tok::Eof) {
        return Ok(out);
    }
    loop {
        out.push(clock_constraint(&mut cur, clocks)?);
        if !(cur.eat("&") || cur.eat(",")) {
            break;
        }
    }
    cur.expect_eof()?;
    Ok(out)
}

fn clock_name(cur: &mut Cursor, clocks: &[String]) -> Result<usize, ParseError> {
    let off = cur.offset();
    let name = cur.ident()?;
    clocks
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| ParseError::at(cur.src, off, format!("undeclared clock '{name}'")))
}

fn clock_constraint(cur: &mut Cursor, clocks: &[String]) -> Result<ClockConstraint, ParseError> {
    let left = clock_name(cur, clocks)?;
    let right = if cur.eat("-") {
        Some(clock_name(cur, clocks)?)
    } else {
        None
    };
    let cmp = match cur.peek() {
        Tok::Punct(p) => Cmp::parse(p),
        _ => None,
    }
    .ok_or_else(|| cur.unexpected("comparison"))?;
    cur.next();
    let off = cur.offset();
    let v = cur.number()?;
    if v.fract() != 0.0 || v.abs() > 1e12 {
        return Err(ParseError::at(cur.src, off, "clock constants must be integers"));
    }
    Ok(ClockConstraint {
        left,
        right,
        cmp,
        constant: v as i64,
    })
}

/// Parses a conjunction of observation literals such as `safe_gap & !stop_sign_ahead`.
pub fn parse_literals(text: &str, observations: &[String]) -> Result<Vec<ObsLiteral>, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut out = Vec::new();
    if matches!(cur.peek(), Tok::Eof) {
        return Ok(out);
    }
    loop {
        let value = !cur.eat("!");
        let off = cur.offset();
        let name = cur.ident()?;
        let index = observations
            .iter()
            .position(|o| *o == name)
            .ok_or_else(|| ParseError::at(cur.src, off, format!("undeclared observation '{name}'")))?;
        out.push(ObsLiteral { index, value });
        if !(cur.eat("&") || cur.eat(",")) {
            break;
        }
    }
    cur.expect_eof()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clocks() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn parses_simple_and_diagonal_constraints() {
        let cs = parse_clock_constraints("x >= 2 & x - y < 3", &clocks()).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0], ClockConstraint { left: 0, right: None, cmp: Cmp::Ge, constant: 2 });
        assert!(cs[1].is_diagonal());
        assert_eq!(cs[1].render(&clocks()), "x - y < 3");
        assert!(parse_clock_constraints("", &clocks()).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_constraints() {
        assert!(parse_clock_constraints("z <= 1", &clocks()).is_err());
        assert!(parse_clock_constraints("x <= 1.5", &clocks()).is_err());
        assert!(parse_clock_constraints("x 1", &clocks()).is_err());
    }

    #[test]
    fn scaled_evaluation() {
        let c = parse_clock_constraints("x > 2", &clocks()).unwrap().remove(0);
        assert!(!c.holds_scaled(&[8, 0], 4));
        assert!(c.holds_scaled(&[9, 0], 4));
    }

    #[test]
    fn literals() {
        let obs = vec!["a".to_string(), "b".to_string()];
        let l = parse_literals("a & !b", &obs).unwrap();
        assert!(literals_hold(&l, 0b01));
        assert!(!literals_hold(&l, 0b11));
        assert!(parse_literals("c", &obs).is_err());
    }
}
