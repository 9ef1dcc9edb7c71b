use std::fmt;

use serde::{Deserialize, Serialize};

use super::predicate::{parse_predicate, Pred};
use super::AssertionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Invariant,
    Execution,
    #[serde(rename = "pre")]
    PreCondition,
    #[serde(rename = "post")]
    PostCondition,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Invariant => "invariant",
            Kind::Execution => "execution",
            Kind::PreCondition => "pre",
            Kind::PostCondition => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Window in seconds.
    Temporal,
    /// Window in meters of ego travel.
    Physical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub kind: Kind,
    pub flavor: Flavor,
    pub window: Option<f64>,
    /// Every true trigger step is a reference point, not only rising edges.
    pub all_edges: bool,
    pub trigger: Option<Pred>,
    pub condition: Pred,
}

impl Assertion {
    pub fn invariant(name: &str, condition: Pred) -> Assertion {
        Assertion {
            name: name.to_string(),
            kind: Kind::Invariant,
            flavor: Flavor::Temporal,
            window: None,
            all_edges: false,
            trigger: None,
            condition,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            Kind::Invariant => {
                if self.trigger.is_some() || self.window.is_some() {
                    return Err("an invariant takes neither trigger nor window".into());
                }
            }
            Kind::Execution => {
                if self.trigger.is_none() {
                    return Err("an execution assertion needs a trigger".into());
                }
                if self.window.is_some() {
                    return Err("an execution assertion takes no window".into());
                }
            }
            Kind::PreCondition | Kind::PostCondition => {
                if self.trigger.is_none() {
                    return Err(format!("a {} assertion needs a trigger", self.kind.as_str()));
                }
                match self.window {
                    None => return Err(format!("a {} assertion needs a window", self.kind.as_str())),
                    Some(w) if !(w > 0.0) || !w.is_finite() => return Err("window must be positive".into()),
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assert {} kind={}", self.name, self.kind.as_str())?;
        if matches!(self.kind, Kind::PreCondition | Kind::PostCondition) {
            let fl = match self.flavor {
                Flavor::Temporal => "temporal",
                Flavor::Physical => "physical",
            };
            write!(f, " flavor={fl}")?;
        }
        if let Some(w) = self.window {
            write!(f, " window={w}")?;
        }
        if self.all_edges {
            write!(f, " edges=all")?;
        }
        if let Some(t) = &self.trigger {
            write!(f, "\n  trigger: {t}")?;
        }
        write!(f, "\n  condition: {}", self.condition)
    }
}

/// Byte offset of `marker` outside double-quoted strings.
fn find_marker(text: &str, marker: &str) -> Option<usize> {
    let mut quoted = false;
    for (i, c) in text.char_indices() {
        if c == '"' {
            quoted = !quoted;
        } else if !quoted && text[i..].starts_with(marker) {
            let before = text[..i].chars().next_back();
            if before.is_none_or(|b| !(b.is_alphanumeric() || b == '_')) {
                return Some(i);
            }
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].matches('\n').count()
}

/// Parses stanzas of the form
/// `assert <name> kind=<k> [flavor=..] [window=..] [edges=all] [trigger: <pred>] condition: <pred>`.
/// A stanza runs until the next line starting with `assert`; `#` starts a
/// comment line.
pub fn parse_assertions(text: &str) -> Result<Vec<Assertion>, AssertionError> {
    let mut stanzas: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("assert ") || line == "assert" {
            stanzas.push((i + 1, String::new()));
        }
        match stanzas.last_mut() {
            Some((_, body)) => {
                body.push_str(raw);
                body.push('\n');
            }
            None => {
                return Err(AssertionError::Syntax {
                    stanza: String::new(),
                    line: i + 1,
                    message: "expected 'assert <name> ...'".into(),
                })
            }
        }
    }
    let mut out: Vec<Assertion> = Vec::new();
    for (line, body) in stanzas {
        let a = parse_stanza(line, &body)?;
        if out.iter().any(|b| b.name == a.name) {
            return Err(AssertionError::Syntax {
                stanza: a.name.clone(),
                line,
                message: "duplicate assertion name".into(),
            });
        }
        out.push(a);
    }
    Ok(out)
}

fn parse_stanza(first_line: usize, body: &str) -> Result<Assertion, AssertionError> {
    let err = |name: &str, at: usize, message: String| AssertionError::Syntax {
        stanza: name.to_string(),
        line: first_line + line_of(body, at),
        message,
    };
    let trig_at = find_marker(body, "trigger:");
    let cond_at = find_marker(body, "condition:").ok_or_else(|| err("", 0, "missing 'condition:'".into()))?;
    let head_end = trig_at.map_or(cond_at, |t| t.min(cond_at));
    let mut words = body[..head_end].split_whitespace();
    words.next(); // "assert"
    let name = words
        .next()
        .ok_or_else(|| err("", 0, "missing assertion name".into()))?
        .to_string();
    let mut kind = None;
    let mut flavor = None;
    let mut window = None;
    let mut all_edges = false;
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| err(&name, 0, format!("expected key=value, got '{w}'")))?;
        match k {
            "kind" => {
                kind = Some(match v {
                    "invariant" => Kind::Invariant,
                    "execution" => Kind::Execution,
                    "pre" | "precondition" => Kind::PreCondition,
                    "post" | "postcondition" => Kind::PostCondition,
                    _ => return Err(err(&name, 0, format!("unknown kind '{v}'"))),
                })
            }
            "flavor" => {
                flavor = Some(match v {
                    "temporal" => Flavor::Temporal,
                    "physical" => Flavor::Physical,
                    _ => return Err(err(&name, 0, format!("unknown flavor '{v}'"))),
                })
            }
            "window" => {
                let x: f64 = v
                    .trim_end_matches('s')
                    .trim_end_matches('m')
                    .parse()
                    .map_err(|_| err(&name, 0, format!("malformed window '{v}'")))?;
                window = Some(x);
            }
            "edges" => match v {
                "all" => all_edges = true,
                "rising" => all_edges = false,
                _ => return Err(err(&name, 0, format!("unknown edges mode '{v}'"))),
            },
            _ => return Err(err(&name, 0, format!("unknown key '{k}'"))),
        }
    }
    let kind = kind.ok_or_else(|| err(&name, 0, "missing kind=".into()))?;
    if flavor.is_some() && !matches!(kind, Kind::PreCondition | Kind::PostCondition) {
        return Err(err(&name, 0, "flavor applies to pre/post assertions only".into()));
    }
    let clause = |start: usize, marker: &str, end: usize| -> Result<Pred, AssertionError> {
        let from = start + marker.len();
        let src = &body[from..end];
        parse_predicate(src).map_err(|e| AssertionError::Syntax {
            stanza: name.clone(),
            line: first_line + line_of(body, from) + e.line - 1,
            message: e.message,
        })
    };
    let trigger = match trig_at {
        Some(t) if t < cond_at => Some(clause(t, "trigger:", cond_at)?),
        Some(t) => Some(clause(t, "trigger:", body.len())?),
        None => None,
    };
    let cond_end = trig_at.filter(|&t| t > cond_at).unwrap_or(body.len());
    let condition = clause(cond_at, "condition:", cond_end)?;
    let a = Assertion {
        name: name.clone(),
        kind,
        flavor: flavor.unwrap_or(Flavor::Temporal),
        window,
        all_edges,
        trigger,
        condition,
    };
    a.validate().map_err(|m| err(&name, 0, m))?;
    Ok(a)
}
