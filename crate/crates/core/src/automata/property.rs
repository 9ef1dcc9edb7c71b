use serde::{Deserialize, Serialize};

use crate::lex::{Cursor, ParseError};
use crate::spatial::Cmp;

use super::model::{parse_clock_constraints, ClockConstraint, TimedAutomaton, Valuation};

/// Boolean combination of location membership, location history and
/// observation literals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateExpr {
    True,
    /// The automaton is in this location.
    At(usize),
    /// The location has been visited on the current run (including now).
    Visited(usize),
    Obs(usize),
    Not(Box<StateExpr>),
    And(Box<StateExpr>, Box<StateExpr>),
    Or(Box<StateExpr>, Box<StateExpr>),
}

impl StateExpr {
    pub fn eval(&self, loc: usize, val: Valuation, visited: &dyn Fn(usize) -> bool) -> bool {
        match self {
            StateExpr::True => true,
            StateExpr::At(l) => *l == loc,
            StateExpr::Visited(l) => visited(*l),
            StateExpr::Obs(o) => (val >> o) & 1 == 1,
            StateExpr::Not(a) => !a.eval(loc, val, visited),
            StateExpr::And(a, b) => a.eval(loc, val, visited) && b.eval(loc, val, visited),
            StateExpr::Or(a, b) => a.eval(loc, val, visited) || b.eval(loc, val, visited),
        }
    }

    pub fn visited_locations(&self, out: &mut Vec<usize>) {
        match self {
            StateExpr::Visited(l) => {
                if !out.contains(l) {
                    out.push(*l)
                }
            }
            StateExpr::Not(a) => a.visited_locations(out),
            StateExpr::And(a, b) | StateExpr::Or(a, b) => {
                a.visited_locations(out);
                b.visited_locations(out);
            }
            _ => {}
        }
    }

    pub fn observations(&self, out: &mut Vec<usize>) {
        match self {
            StateExpr::Obs(o) => {
                if !out.contains(o) {
                    out.push(*o)
                }
            }
            StateExpr::Not(a) => a.observations(out),
            StateExpr::And(a, b) | StateExpr::Or(a, b) => {
                a.observations(out);
                b.observations(out);
            }
            _ => {}
        }
    }

    /// Renders with the automaton's symbol names.
    pub fn render(&self, ta: &TimedAutomaton) -> String {
        match self {
            StateExpr::True => "true".into(),
            StateExpr::At(l) => format!("at({})", ta.locations[*l].name),
            StateExpr::Visited(l) => format!("visited({})", ta.locations[*l].name),
            StateExpr::Obs(o) => ta.observations[*o].clone(),
            StateExpr::Not(a) => format!("!{}", a.render_atomic(ta)),
            StateExpr::And(a, b) => format!("{} & {}", a.render_atomic(ta), b.render_atomic(ta)),
            StateExpr::Or(a, b) => format!("({} | {})", a.render(ta), b.render(ta)),
        }
    }

    fn render_atomic(&self, ta: &TimedAutomaton) -> String {
        match self {
            StateExpr::And(..) | StateExpr::Or(..) => format!("({})", self.render(ta)),
            _ => self.render(ta),
        }
    }
}

/// Parses `at(loc)`, `visited(loc)`, `obs(name)` or a bare observation name,
/// combined with `!`, `&`, `|` and parentheses.
pub fn parse_state_expr(text: &str, ta: &TimedAutomaton) -> Result<StateExpr, ParseError> {
    let mut cur = Cursor::new(text)?;
    let e = or_expr(&mut cur, ta)?;
    cur.expect_eof()?;
    Ok(e)
}

fn or_expr(cur: &mut Cursor, ta: &TimedAutomaton) -> Result<StateExpr, ParseError> {
    let mut e = and_expr(cur, ta)?;
    while cur.eat("|") {
        e = StateExpr::Or(Box::new(e), Box::new(and_expr(cur, ta)?));
    }
    Ok(e)
}

fn and_expr(cur: &mut Cursor, ta: &TimedAutomaton) -> Result<StateExpr, ParseError> {
    let mut e = unary(cur, ta)?;
    while cur.eat("&") {
        e = StateExpr::And(Box::new(e), Box::new(unary(cur, ta)?));
    }
    Ok(e)
}

fn unary(cur: &mut Cursor, ta: &TimedAutomaton) -> Result<StateExpr, ParseError> {
    if cur.eat("!") {
        return Ok(StateExpr::Not(Box::new(unary(cur, ta)?)));
    }
    if cur.eat("(") {
        let e = or_expr(cur, ta)?;
        cur.expect(")")?;
        return Ok(e);
    }
    let off = cur.offset();
    let name = cur.ident()?;
    let undeclared = |cur: &Cursor, what: &str, n: &str| {
        ParseError::at(cur.src, off, format!("undeclared {what} '{n}'"))
    };
    match name.as_str() {
        "true" => Ok(StateExpr::True),
        "at" | "visited" if cur.is_punct("(") => {
            cur.expect("(")?;
            let loc = cur.ident()?;
            cur.expect(")")?;
            let idx = ta
                .location_index(&loc)
                .ok_or_else(|| undeclared(cur, "location", &loc))?;
            Ok(if name == "at" {
                StateExpr::At(idx)
            } else {
                StateExpr::Visited(idx)
            })
        }
        "obs" if cur.is_punct("(") => {
            cur.expect("(")?;
            let o = cur.ident()?;
            cur.expect(")")?;
            let idx = ta
                .observation_index(&o)
                .ok_or_else(|| undeclared(cur, "observation", &o))?;
            Ok(StateExpr::Obs(idx))
        }
        _ => ta
            .observation_index(&name)
            .map(StateExpr::Obs)
            .ok_or_else(|| undeclared(cur, "observation", &name)),
    }
}

/// Safety property: the bad predicate (optionally restricted by a clock
/// constraint) must be unreachable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub name: String,
    pub bad: StateExpr,
    pub clock: Vec<ClockConstraint>,
    /// Source text of the bad predicate.
    pub text: String,
}

impl SafetyProperty {
    pub fn parse(name: &str, bad: &str, clock: &str, ta: &TimedAutomaton) -> Result<SafetyProperty, ParseError> {
        Ok(SafetyProperty {
            name: name.to_string(),
            bad: parse_state_expr(bad, ta)?,
            clock: parse_clock_constraints(clock, &ta.clocks)?,
            text: bad.to_string(),
        })
    }
}

/// Restricts the observation valuations the environment may produce while
/// the automaton is in `location` (all locations when `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub location: Option<usize>,
    pub allow: StateExpr,
    pub text: String,
}

/// A named physical meaning of an observation that the verdict relies on,
/// e.g. `safe_gap` is only raised when the gap is at least 4.5 m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvAssumption {
    pub name: String,
    pub observation: String,
    pub relation: Cmp,
    pub value: f64,
}

/// Observation environment. The default is the unconstrained (worst-case)
/// environment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    pub restrictions: Vec<Restriction>,
    pub assumptions: Vec<EnvAssumption>,
}

impl Environment {
    pub fn unconstrained() -> Environment {
        Environment::default()
    }

    /// Valuations the environment may produce at `loc`, in increasing
    /// bit order.
    pub fn allowed(&self, ta: &TimedAutomaton, loc: usize) -> Vec<Valuation> {
        let n = ta.observations.len();
        (0..(1u64 << n))
            .filter(|&v| {
                self.restrictions
                    .iter()
                    .filter(|r| r.location.is_none_or(|l| l == loc))
                    .all(|r| r.allow.eval(loc, v, &|_| false))
            })
            .collect()
    }

    pub fn add_restriction(&mut self, ta: &TimedAutomaton, location: Option<&str>, allow: &str) -> Result<(), ParseError> {
        let loc = match location {
            Some(name) => Some(ta.location_index(name).ok_or_else(|| ParseError {
                line: 1,
                column: 1,
                message: format!("undeclared location '{name}'"),
            })?),
            None => None,
        };
        let expr = parse_state_expr(allow, ta)?;
        let mut obs_only = true;
        check_obs_only(&expr, &mut obs_only);
        if !obs_only {
            return Err(ParseError {
                line: 1,
                column: 1,
                message: "restrictions may only mention observations".into(),
            });
        }
        self.restrictions.push(Restriction {
            location: loc,
            allow: expr,
            text: allow.to_string(),
        });
        Ok(())
    }
}

fn check_obs_only(e: &StateExpr, ok: &mut bool) {
    match e {
        StateExpr::At(_) | StateExpr::Visited(_) => *ok = false,
        StateExpr::Not(a) => check_obs_only(a, ok),
        StateExpr::And(a, b) | StateExpr::Or(a, b) => {
            check_obs_only(a, ok);
            check_obs_only(b, ok);
        }
        _ => {}
    }
}
