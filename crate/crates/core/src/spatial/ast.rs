use std::fmt;

use serde::{Deserialize, Serialize};

use crate::traffic::{SignKind, EPS};

/// Comparison operator shared by length constraints, clock constraints and
/// trace predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    pub fn as_str(&self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    pub fn parse(s: &str) -> Option<Cmp> {
        match s {
            "<" => Some(Cmp::Lt),
            "<=" => Some(Cmp::Le),
            "=" | "==" => Some(Cmp::Eq),
            ">=" => Some(Cmp::Ge),
            ">" => Some(Cmp::Gt),
            _ => None,
        }
    }

    /// `lhs cmp rhs` with an absolute tolerance of [`EPS`].
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            Cmp::Lt => lhs < rhs - EPS,
            Cmp::Le => lhs <= rhs + EPS,
            Cmp::Eq => (lhs - rhs).abs() <= EPS,
            Cmp::Ge => lhs >= rhs - EPS,
            Cmp::Gt => lhs > rhs + EPS,
        }
    }

    pub fn holds_int(&self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LenValue {
    Meters(f64),
    /// Length of an agent, optionally widened by a safety margin.
    SizeOf { agent: String, margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Free,
    Re(String),
    Aut(String, bool),
    SignAhead(SignKind),
    CrossingAhead,
    Len(Cmp, LenValue),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// Horizontal chop: the view splits into a left part satisfying the
    /// first operand and a right part satisfying the second.
    Chop(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn chop(a: Formula, b: Formula) -> Formula {
        Formula::Chop(Box::new(a), Box::new(b))
    }

    /// The safe-gap abbreviation: free space at least as long as `agent`.
    pub fn safe_gap(agent: &str) -> Formula {
        Formula::and(
            Formula::Free,
            Formula::Len(
                Cmp::Ge,
                LenValue::SizeOf {
                    agent: agent.to_string(),
                    margin: 0.0,
                },
            ),
        )
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Not(a) => 1 + a.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Chop(a, b) => {
                1 + a.depth().max(b.depth())
            }
            _ => 1,
        }
    }

    /// Agent identifiers referenced anywhere in the formula.
    pub fn agents(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |f| match f {
            Formula::Re(a) | Formula::Aut(a, _) => out.push(a.as_str()),
            Formula::Len(_, LenValue::SizeOf { agent, .. }) => out.push(agent.as_str()),
            _ => {}
        });
        out
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::Not(a) => a.visit(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Chop(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub(crate) fn rename_agents(&self, map: &dyn Fn(&str) -> String) -> Formula {
        match self {
            Formula::Re(a) => Formula::Re(map(a)),
            Formula::Aut(a, b) => Formula::Aut(map(a), *b),
            Formula::Len(c, LenValue::SizeOf { agent, margin }) => Formula::Len(
                *c,
                LenValue::SizeOf {
                    agent: map(agent),
                    margin: *margin,
                },
            ),
            Formula::Not(a) => Formula::not(a.rename_agents(map)),
            Formula::And(a, b) => Formula::and(a.rename_agents(map), b.rename_agents(map)),
            Formula::Or(a, b) => Formula::or(a.rename_agents(map), b.rename_agents(map)),
            Formula::Chop(a, b) => Formula::chop(a.rename_agents(map), b.rename_agents(map)),
            other => other.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Chop(..) => 0,
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(..) => 3,
            _ => 4,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for LenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LenValue::Meters(v) => write!(f, "{v}"),
            LenValue::SizeOf { agent, margin } if *margin == 0.0 => write!(f, "size({agent})"),
            LenValue::SizeOf { agent, margin } => write!(f, "size({agent}) + {margin}"),
        }
    }
}

/// Concrete syntax; `parse_formula(&f.to_string())` yields `f` again.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Free => f.write_str("free"),
            Formula::Re(a) => write!(f, "re({a})"),
            Formula::Aut(a, b) => write!(f, "aut({a})={}", u8::from(*b)),
            Formula::SignAhead(k) => write!(f, "sign({})", k.as_str()),
            Formula::CrossingAhead => f.write_str("crossing"),
            Formula::Len(c, v) => write!(f, "len {c} {v}"),
            Formula::Not(a) => {
                f.write_str("!")?;
                a.write_child(f, 3)
            }
            Formula::And(a, b) => {
                a.write_child(f, 2)?;
                f.write_str(" & ")?;
                b.write_child(f, 3)
            }
            Formula::Or(a, b) => {
                a.write_child(f, 1)?;
                f.write_str(" | ")?;
                b.write_child(f, 2)
            }
            Formula::Chop(a, b) => {
                a.write_child(f, 1)?;
                f.write_str(" ; ")?;
                b.write_child(f, 0)
            }
        }
    }
}
