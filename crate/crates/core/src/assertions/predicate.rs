use std::fmt;

use crate::lex::{Cursor, ParseError, Tok};
use crate::spatial::{parse_formula, Formula};
use crate::traffic::{SignKind, TurnSignal};

/// `ego` or a concrete agent id.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentRef {
    Ego,
    Id(String),
}

impl AgentRef {
    pub fn resolve<'a>(&'a self, ego: &'a str) -> &'a str {
        match self {
            AgentRef::Ego => ego,
            AgentRef::Id(id) => id,
        }
    }
}

impl fmt::Display for AgentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentRef::Ego => f.write_str("ego"),
            AgentRef::Id(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl RelOp {
    fn parse(p: &str) -> Option<RelOp> {
        Some(match p {
            "<" => RelOp::Lt,
            "<=" => RelOp::Le,
            "=" | "==" => RelOp::Eq,
            "!=" => RelOp::Ne,
            ">=" => RelOp::Ge,
            ">" => RelOp::Gt,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
        }
    }

    /// Comparison with the spatial tolerance of 1e-9.
    pub fn holds(&self, a: f64, b: f64) -> bool {
        let eps = crate::traffic::EPS;
        match self {
            RelOp::Lt => a < b - eps,
            RelOp::Le => a <= b + eps,
            RelOp::Eq => (a - b).abs() <= eps,
            RelOp::Ne => (a - b).abs() > eps,
            RelOp::Ge => a >= b - eps,
            RelOp::Gt => a > b + eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Num(f64),
    Speed(AgentRef),
    Pos(AgentRef),
    Accel(AgentRef),
    Size(AgentRef),
    /// Signed distance from the agent's front to the nearest sign of the
    /// kind on its lane.
    DistToSign(AgentRef, SignKind),
    /// Signed distance from the agent's front to the start of the nearest
    /// crossing on its lane.
    DistToCrossing(AgentRef),
    /// Distance from the first agent's front to the second's rear, same lane.
    DistTo(AgentRef, AgentRef),
    /// Smallest bumper-to-bumper gap to any other agent on the same lane
    /// (negative when bodies overlap; infinite when alone).
    MinGap(AgentRef),
    Time,
    Step,
    /// Seconds since the controller entered its current location.
    LocTime,
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
}

/// Spatial view for `usl(..)`, relative to the ego.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewSpec {
    /// `[res.lo, res.hi + h]`; `None` means the ego's length.
    Reach(Option<f64>),
    /// `h` meters ahead of the reservation.
    Ahead(f64),
    /// `[front + a, front + b]`.
    Front(f64, f64),
    Reservation,
    Lane,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Const(bool),
    Rel(Term, RelOp, Term),
    LaneIs(AgentRef, String, bool),
    SignalIs(AgentRef, TurnSignal, bool),
    Aut(AgentRef),
    Usl {
        text: String,
        formula: Formula,
        view: ViewSpec,
    },
    Obs(String),
    InIntersection(AgentRef),
    InCrossing(AgentRef),
    At(String),
    Once(Box<Pred>),
    Prev(Box<Pred>),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

impl Pred {
    pub fn and(a: Pred, b: Pred) -> Pred {
        Pred::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Pred, b: Pred) -> Pred {
        Pred::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Pred) -> Pred {
        Pred::Not(Box::new(a))
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Pred)) {
        f(self);
        match self {
            Pred::Once(a) | Pred::Prev(a) | Pred::Not(a) => a.visit(f),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// True when the value at a step depends only on that step.
    pub fn is_pointwise(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |p| ok &= !matches!(p, Pred::Once(_) | Pred::Prev(_)));
        ok
    }

    pub fn needs_snapshot(&self) -> bool {
        let mut yes = false;
        self.visit(&mut |p| yes |= matches!(p, Pred::Usl { .. }));
        yes
    }

    pub fn observations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |p| {
            if let Pred::Obs(o) = p {
                if !out.contains(o) {
                    out.push(o.clone());
                }
            }
        });
        out
    }

    /// Agent ids mentioned explicitly (not through `ego`).
    pub fn agents(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |a: &AgentRef| {
            if let AgentRef::Id(id) = a {
                if !out.contains(id) {
                    out.push(id.clone());
                }
            }
        };
        self.visit(&mut |p| match p {
            Pred::Rel(a, _, b) => {
                a.agents(&mut add);
                b.agents(&mut add);
            }
            Pred::LaneIs(a, ..) | Pred::SignalIs(a, ..) | Pred::Aut(a) | Pred::InIntersection(a) | Pred::InCrossing(a) => add(a),
            _ => {}
        });
        out
    }

    /// Every numeric term appearing in a comparison, for diagnostics.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        self.visit(&mut |p| {
            if let Pred::Rel(a, _, b) = p {
                for t in [a, b] {
                    if !matches!(t, Term::Num(_)) && !out.contains(t) {
                        out.push(t.clone());
                    }
                }
            }
        });
        out
    }
}

impl Term {
    fn agents(&self, add: &mut dyn FnMut(&AgentRef)) {
        match self {
            Term::Speed(a) | Term::Pos(a) | Term::Accel(a) | Term::Size(a) | Term::DistToSign(a, _) | Term::DistToCrossing(a) | Term::MinGap(a) => add(a),
            Term::DistTo(a, b) => {
                add(a);
                add(b);
            }
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.agents(add);
                b.agents(add);
            }
            Term::Num(_) | Term::Time | Term::Step | Term::LocTime => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Num(v) => write!(f, "{v}"),
            Term::Speed(a) => write!(f, "speed({a})"),
            Term::Pos(a) => write!(f, "pos({a})"),
            Term::Accel(a) => write!(f, "accel({a})"),
            Term::Size(a) => write!(f, "size({a})"),
            Term::DistToSign(a, k) => write!(f, "dist_to_sign({a}, {})", k.as_str()),
            Term::DistToCrossing(a) => write!(f, "dist_to_crossing({a})"),
            Term::DistTo(a, b) => write!(f, "dist_to({a}, {b})"),
            Term::MinGap(a) => write!(f, "min_gap({a}, *)"),
            Term::Time => f.write_str("time"),
            Term::Step => f.write_str("step"),
            Term::LocTime => f.write_str("loc_time"),
            Term::Add(a, b) => write!(f, "{a} + {b}"),
            Term::Sub(a, b) => match **b {
                Term::Add(..) | Term::Sub(..) => write!(f, "{a} - ({b})"),
                _ => write!(f, "{a} - {b}"),
            },
        }
    }
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewSpec::Reach(None) => f.write_str("reach(size)"),
            ViewSpec::Reach(Some(h)) => write!(f, "reach({h})"),
            ViewSpec::Ahead(h) => write!(f, "ahead({h})"),
            ViewSpec::Front(a, b) => write!(f, "front({a}, {b})"),
            ViewSpec::Reservation => f.write_str("reservation"),
            ViewSpec::Lane => f.write_str("lane"),
        }
    }
}

impl Pred {
    fn prec(&self) -> u8 {
        match self {
            Pred::Or(..) => 0,
            Pred::And(..) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Pred::Const(b) => write!(f, "{b}"),
            Pred::Rel(a, op, b) => write!(f, "{a} {} {b}", op.as_str()),
            Pred::LaneIs(a, l, eq) => write!(f, "lane({a}) {} \"{l}\"", if *eq { "==" } else { "!=" }),
            Pred::SignalIs(a, s, eq) => write!(f, "turn_signal({a}) {} \"{}\"", if *eq { "==" } else { "!=" }, s.as_str()),
            Pred::Aut(a) => write!(f, "aut({a})"),
            Pred::Usl { text, view, .. } => write!(f, "usl(\"{text}\", {view})"),
            Pred::Obs(o) => write!(f, "obs({o})"),
            Pred::InIntersection(a) => write!(f, "in_intersection({a})"),
            Pred::InCrossing(a) => write!(f, "in_crossing({a})"),
            Pred::At(l) => write!(f, "at(\"{l}\")"),
            Pred::Once(p) => write!(f, "once({p})"),
            Pred::Prev(p) => write!(f, "prev({p})"),
            Pred::Not(p) => {
                write!(f, "!")?;
                p.fmt_at(f, 2)
            }
            Pred::And(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " & ")?;
                b.fmt_at(f, 2)
            }
            Pred::Or(a, b) => {
                a.fmt_at(f, 0)?;
                write!(f, " | ")?;
                b.fmt_at(f, 1)
            }
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

pub fn parse_predicate(text: &str) -> Result<Pred, ParseError> {
    let mut cur = Cursor::new(text)?;
    let p = or(&mut cur)?;
    cur.expect_eof()?;
    Ok(p)
}

fn or(cur: &mut Cursor) -> Result<Pred, ParseError> {
    let mut p = and(cur)?;
    while cur.eat("|") {
        p = Pred::or(p, and(cur)?);
    }
    Ok(p)
}

fn and(cur: &mut Cursor) -> Result<Pred, ParseError> {
    let mut p = unary(cur)?;
    while cur.eat("&") || cur.eat("&&") {
        p = Pred::and(p, unary(cur)?);
    }
    Ok(p)
}

fn unary(cur: &mut Cursor) -> Result<Pred, ParseError> {
    if cur.eat("!") {
        return Ok(Pred::not(unary(cur)?));
    }
    if cur.eat("(") {
        let p = or(cur)?;
        cur.expect(")")?;
        return Ok(p);
    }
    atom(cur)
}

fn agent(cur: &mut Cursor) -> Result<AgentRef, ParseError> {
    let id = cur.ident()?;
    Ok(if id == "ego" { AgentRef::Ego } else { AgentRef::Id(id) })
}

fn agent_arg(cur: &mut Cursor) -> Result<AgentRef, ParseError> {
    cur.expect("(")?;
    let a = agent(cur)?;
    cur.expect(")")?;
    Ok(a)
}

fn string(cur: &mut Cursor) -> Result<String, ParseError> {
    match cur.peek().clone() {
        Tok::Str(s) => {
            cur.next();
            Ok(s)
        }
        Tok::Ident(s) => {
            cur.next();
            Ok(s)
        }
        _ => Err(cur.unexpected("string")),
    }
}

fn rel_op(cur: &mut Cursor) -> Result<RelOp, ParseError> {
    let op = match cur.peek() {
        Tok::Punct(p) => RelOp::parse(p),
        _ => None,
    }
    .ok_or_else(|| cur.unexpected("comparison"))?;
    cur.next();
    Ok(op)
}

fn eq_op(cur: &mut Cursor) -> Result<bool, ParseError> {
    match rel_op(cur)? {
        RelOp::Eq => Ok(true),
        RelOp::Ne => Ok(false),
        _ => Err(cur.error("expected '==' or '!='")),
    }
}

const TERM_FNS: [&str; 11] = [
    "speed", "pos", "accel", "size", "dist_to_sign", "dist_to_crossing", "dist_to", "min_gap", "time", "step", "loc_time",
];

fn atom(cur: &mut Cursor) -> Result<Pred, ParseError> {
    let off = cur.offset();
    let name = match cur.peek().clone() {
        Tok::Ident(s) => s,
        Tok::Num(_) | Tok::Punct("-") => return comparison(cur),
        _ => return Err(cur.unexpected("predicate")),
    };
    if TERM_FNS.contains(&name.as_str()) {
        return comparison(cur);
    }
    cur.next();
    let call = cur.is_punct("(");
    match name.as_str() {
        "true" => Ok(Pred::Const(true)),
        "false" => Ok(Pred::Const(false)),
        "lane" if call => {
            let a = agent_arg(cur)?;
            let eq = eq_op(cur)?;
            Ok(Pred::LaneIs(a, string(cur)?, eq))
        }
        "turn_signal" if call => {
            let a = agent_arg(cur)?;
            let eq = eq_op(cur)?;
            let soff = cur.offset();
            let s = string(cur)?;
            let sig = match s.as_str() {
                "off" => TurnSignal::Off,
                "left" => TurnSignal::Left,
                "right" => TurnSignal::Right,
                _ => return Err(ParseError::at(cur.src, soff, format!("unknown turn signal '{s}'"))),
            };
            Ok(Pred::SignalIs(a, sig, eq))
        }
        "aut" if call => Ok(Pred::Aut(agent_arg(cur)?)),
        "in_intersection" if call => Ok(Pred::InIntersection(agent_arg(cur)?)),
        "in_crossing" if call => Ok(Pred::InCrossing(agent_arg(cur)?)),
        "obs" if call => {
            cur.expect("(")?;
            let o = cur.ident()?;
            cur.expect(")")?;
            Ok(Pred::Obs(o))
        }
        "at" if call => {
            cur.expect("(")?;
            let l = string(cur)?;
            cur.expect(")")?;
            Ok(Pred::At(l))
        }
        "once" | "prev" if call => {
            cur.expect("(")?;
            let p = or(cur)?;
            cur.expect(")")?;
            Ok(if name == "once" { Pred::Once(Box::new(p)) } else { Pred::Prev(Box::new(p)) })
        }
        "usl" if call => {
            cur.expect("(")?;
            let soff = cur.offset();
            let text = match cur.peek().clone() {
                Tok::Str(s) => {
                    cur.next();
                    s
                }
                _ => return Err(cur.unexpected("quoted formula")),
            };
            let formula = parse_formula(&text)
                .map_err(|e| ParseError::at(cur.src, soff + 1, format!("in formula: {}", e.message)))?;
            let view = if cur.eat(",") { view_spec(cur)? } else { ViewSpec::Reach(None) };
            cur.expect(")")?;
            Ok(Pred::Usl { text, formula, view })
        }
        _ if call => Err(ParseError::at(cur.src, off, format!("unknown predicate '{name}'"))),
        _ => Ok(Pred::Obs(name)),
    }
}

fn view_spec(cur: &mut Cursor) -> Result<ViewSpec, ParseError> {
    let off = cur.offset();
    let name = cur.ident()?;
    let v = match name.as_str() {
        "reservation" => ViewSpec::Reservation,
        "lane" => ViewSpec::Lane,
        "reach" => {
            cur.expect("(")?;
            let h = if matches!(cur.peek(), Tok::Ident(s) if s == "size") {
                cur.next();
                None
            } else {
                Some(cur.number()?)
            };
            cur.expect(")")?;
            ViewSpec::Reach(h)
        }
        "ahead" => {
            cur.expect("(")?;
            let h = cur.number()?;
            cur.expect(")")?;
            ViewSpec::Ahead(h)
        }
        "front" => {
            cur.expect("(")?;
            let a = cur.number()?;
            cur.expect(",")?;
            let b = cur.number()?;
            cur.expect(")")?;
            if b < a {
                return Err(ParseError::at(cur.src, off, "front(a, b) needs a <= b"));
            }
            ViewSpec::Front(a, b)
        }
        _ => return Err(ParseError::at(cur.src, off, format!("unknown view '{name}'"))),
    };
    Ok(v)
}

fn comparison(cur: &mut Cursor) -> Result<Pred, ParseError> {
    let a = term(cur)?;
    let op = rel_op(cur)?;
    let b = term(cur)?;
    Ok(Pred::Rel(a, op, b))
}

fn term(cur: &mut Cursor) -> Result<Term, ParseError> {
    let mut t = primary(cur)?;
    loop {
        if cur.eat("+") {
            t = Term::Add(Box::new(t), Box::new(primary(cur)?));
        } else if cur.eat("-") {
            t = Term::Sub(Box::new(t), Box::new(primary(cur)?));
        } else {
            return Ok(t);
        }
    }
}

fn primary(cur: &mut Cursor) -> Result<Term, ParseError> {
    if matches!(cur.peek(), Tok::Num(_) | Tok::Punct("-")) {
        return Ok(Term::Num(cur.number()?));
    }
    let off = cur.offset();
    let name = cur.ident()?;
    Ok(match name.as_str() {
        "time" => Term::Time,
        "step" => Term::Step,
        "loc_time" => Term::LocTime,
        "speed" => Term::Speed(agent_arg(cur)?),
        "pos" => Term::Pos(agent_arg(cur)?),
        "accel" => Term::Accel(agent_arg(cur)?),
        "size" => Term::Size(agent_arg(cur)?),
        "dist_to_crossing" => Term::DistToCrossing(agent_arg(cur)?),
        "dist_to_sign" => {
            cur.expect("(")?;
            let a = agent(cur)?;
            cur.expect(",")?;
            let koff = cur.offset();
            let k = cur.ident()?;
            let kind = SignKind::parse(&k)
                .ok_or_else(|| ParseError::at(cur.src, koff, format!("unknown sign kind '{k}'")))?;
            cur.expect(")")?;
            Term::DistToSign(a, kind)
        }
        "dist_to" => {
            cur.expect("(")?;
            let a = agent(cur)?;
            cur.expect(",")?;
            let b = agent(cur)?;
            cur.expect(")")?;
            Term::DistTo(a, b)
        }
        "min_gap" => {
            cur.expect("(")?;
            let a = agent(cur)?;
            cur.expect(",")?;
            cur.expect("*")?;
            cur.expect(")")?;
            Term::MinGap(a)
        }
        _ => return Err(ParseError::at(cur.src, off, format!("unknown field '{name}'"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        for src in [
            "min_gap(ego, *) >= 0",
            "speed(ego) <= 15",
            "speed(E) > 0 & once(obs(at_stop_line))",
            "prev(obs(safe_gap))",
            "usl(\"re(E) ; sg(E)\", reach(4.5))",
            "!at(\"proceed\") | once(speed(ego) <= 0.01 & dist_to_sign(ego, stop) <= 2)",
            "lane(M) == \"cross\" & turn_signal(M) != \"left\"",
            "dist_to(E, M) - size(E) > 1 + 2",
            "(obs(a) | obs(b)) & in_intersection(ego)",
        ] {
            let p = parse_predicate(src).unwrap();
            assert_eq!(parse_predicate(&p.to_string()).unwrap(), p, "{src}");
        }
    }

    #[test]
    fn bare_names_are_observations() {
        assert_eq!(parse_predicate("safe_gap").unwrap(), Pred::Obs("safe_gap".into()));
    }

    #[test]
    fn schema_errors() {
        let e = parse_predicate("velocity(ego) > 1").unwrap_err();
        assert!(e.message.contains("unknown predicate 'velocity'"), "{e}");
        assert!(parse_predicate("speed(ego) >").is_err());
        assert!(parse_predicate("usl(\"free &\")").is_err());
        assert!(parse_predicate("dist_to_sign(ego, yield) < 1").is_err());
    }

    #[test]
    fn pointwise_classification() {
        assert!(parse_predicate("speed(ego) > 0 & obs(x)").unwrap().is_pointwise());
        assert!(!parse_predicate("prev(obs(x))").unwrap().is_pointwise());
    }
}
