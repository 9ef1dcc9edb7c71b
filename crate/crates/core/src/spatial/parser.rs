use std::collections::BTreeMap;

use crate::lex::{Cursor, ParseError, Tok};
use crate::traffic::SignKind;

use super::ast::{Cmp, Formula, LenValue};

/// A named abbreviation, optionally parameterised by agent names.
#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub params: Vec<String>,
    pub body: Formula,
}

/// Named abbreviations expanded at parse time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Library {
    defs: BTreeMap<String, Definition>,
}

impl Library {
    pub fn empty() -> Library {
        Library::default()
    }

    /// Ships `sg(X) := free & len >= size(X)`.
    pub fn standard() -> Library {
        Library::with_gap_margin(0.0)
    }

    /// Like [`Library::standard`], with `margin` meters added to the gap
    /// requirement.
    pub fn with_gap_margin(margin: f64) -> Library {
        let mut lib = Library::empty();
        let body = Formula::and(
            Formula::Free,
            Formula::Len(
                Cmp::Ge,
                LenValue::SizeOf {
                    agent: "X".into(),
                    margin,
                },
            ),
        );
        lib.define("sg", vec!["X".into()], body);
        lib
    }

    pub fn define(&mut self, name: &str, params: Vec<String>, body: Formula) {
        self.defs.insert(name.to_string(), Definition { params, body });
    }

    pub fn get(&self, name: &str) -> Option<&Definition> {
        self.defs.get(name)
    }

    /// Reads `name := formula` / `name(X, Y) := formula` lines; `#` starts a
    /// comment. Definitions may use earlier ones.
    pub fn load(&mut self, text: &str) -> Result<(), ParseError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let Some(split) = line.find(":=") else {
                return Err(ParseError {
                    line: lineno + 1,
                    column: 1,
                    message: "expected 'name := formula'".into(),
                });
            };
            let head = &line[..split];
            let mut cur = Cursor::new(head).map_err(|e| e.relocate(lineno, 0))?;
            let name = cur.ident().map_err(|e| e.relocate(lineno, 0))?;
            let mut params = Vec::new();
            if cur.eat("(") {
                loop {
                    params.push(cur.ident().map_err(|e| e.relocate(lineno, 0))?);
                    if !cur.eat(",") {
                        break;
                    }
                }
                cur.expect(")").map_err(|e| e.relocate(lineno, 0))?;
            }
            cur.expect_eof().map_err(|e| e.relocate(lineno, 0))?;
            let body_src = &line[split + 2..];
            let body = parse_with(body_src, self).map_err(|e| e.relocate(lineno, split + 2))?;
            self.define(&name, params, body);
        }
        Ok(())
    }
}

/// Parses with the standard library of abbreviations.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, &Library::standard())
}

pub fn parse_with(text: &str, lib: &Library) -> Result<Formula, ParseError> {
    let mut p = Parser {
        cur: Cursor::new(text)?,
        lib,
    };
    let f = p.chop()?;
    p.cur.expect_eof()?;
    Ok(f)
}

struct Parser<'a> {
    cur: Cursor<'a>,
    lib: &'a Library,
}

impl Parser<'_> {
    // `;` binds loosest and associates to the right.
    fn chop(&mut self) -> Result<Formula, ParseError> {
        let left = self.or()?;
        if self.cur.eat(";") {
            let right = self.chop()?;
            return Ok(Formula::chop(left, right));
        }
        Ok(left)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.and()?;
        while self.cur.eat("|") {
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.cur.eat("&") {
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.cur.eat("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.cur.eat("(") {
            let f = self.chop()?;
            self.cur.expect(")")?;
            return Ok(f);
        }
        self.atom()
    }

    fn agent_arg(&mut self) -> Result<String, ParseError> {
        self.cur.expect("(")?;
        let id = self.cur.ident()?;
        self.cur.expect(")")?;
        Ok(id)
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let at = self.cur.offset();
        let name = match self.cur.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.cur.unexpected("formula")),
        };
        self.cur.next();
        match name.as_str() {
            "free" => Ok(Formula::Free),
            "crossing" => Ok(Formula::CrossingAhead),
            "re" => Ok(Formula::Re(self.agent_arg()?)),
            "aut" => {
                let id = self.agent_arg()?;
                self.cur.expect("=")?;
                let off = self.cur.offset();
                match self.cur.number()? {
                    v if v == 0.0 => Ok(Formula::Aut(id, false)),
                    v if v == 1.0 => Ok(Formula::Aut(id, true)),
                    _ => Err(crate::lex::ParseError::at(
                        self.cur.src,
                        off,
                        "autonomy flag must be 0 or 1",
                    )),
                }
            }
            "sign" => {
                self.cur.expect("(")?;
                let off = self.cur.offset();
                let kind_name = self.cur.ident()?;
                let kind = SignKind::parse(&kind_name).ok_or_else(|| {
                    ParseError::at(self.cur.src, off, format!("unknown sign kind '{kind_name}'"))
                })?;
                self.cur.expect(")")?;
                Ok(Formula::SignAhead(kind))
            }
            "len" => {
                let cmp = match self.cur.peek() {
                    Tok::Punct(p) => Cmp::parse(p),
                    _ => None,
                }
                .ok_or_else(|| self.cur.unexpected("comparison"))?;
                self.cur.next();
                Ok(Formula::Len(cmp, self.len_value()?))
            }
            _ => self.expand(&name, at),
        }
    }

    fn len_value(&mut self) -> Result<LenValue, ParseError> {
        if matches!(self.cur.peek(), Tok::Ident(s) if s == "size") {
            self.cur.next();
            let agent = self.agent_arg()?;
            let margin = if self.cur.eat("+") {
                self.literal()?
            } else {
                0.0
            };
            return Ok(LenValue::SizeOf { agent, margin });
        }
        Ok(LenValue::Meters(self.literal()?))
    }

    fn literal(&mut self) -> Result<f64, ParseError> {
        let off = self.cur.offset();
        let v = self.cur.number()?;
        if !v.is_finite() || v < 0.0 {
            return Err(ParseError::at(
                self.cur.src,
                off,
                "length must be finite and non-negative",
            ));
        }
        Ok(v)
    }

    fn expand(&mut self, name: &str, at: usize) -> Result<Formula, ParseError> {
        let def = self
            .lib
            .get(name)
            .ok_or_else(|| ParseError::at(self.cur.src, at, format!("unknown atom '{name}'")))?;
        let mut args = Vec::new();
        if self.cur.eat("(") {
            loop {
                args.push(self.cur.ident()?);
                if !self.cur.eat(",") {
                    break;
                }
            }
            self.cur.expect(")")?;
        }
        if args.len() != def.params.len() {
            return Err(ParseError::at(
                self.cur.src,
                at,
                format!(
                    "'{name}' takes {} argument(s), got {}",
                    def.params.len(),
                    args.len()
                ),
            ));
        }
        let subst = |agent: &str| {
            def.params
                .iter()
                .position(|p| p == agent)
                .map_or_else(|| agent.to_string(), |i| args[i].clone())
        };
        Ok(def.body.rename_agents(&subst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size_of(a: &str) -> LenValue {
        LenValue::SizeOf {
            agent: a.into(),
            margin: 0.0,
        }
    }

    #[test]
    fn safe_gap_body() {
        let f = parse_formula("free & len >= size(E)").unwrap();
        assert_eq!(f, Formula::and(Formula::Free, Formula::Len(Cmp::Ge, size_of("E"))));
    }

    #[test]
    fn reservation_chop_safe_gap_expands() {
        let f = parse_formula("re(E) ; sg(E)").unwrap();
        assert_eq!(
            f,
            Formula::chop(
                Formula::Re("E".into()),
                Formula::and(Formula::Free, Formula::Len(Cmp::Ge, size_of("E")))
            )
        );
    }

    #[test]
    fn dangling_operator_reports_position() {
        let err = parse_formula("free &").unwrap_err();
        assert_eq!((err.line, err.column), (1, 7));
    }

    #[test]
    fn unknown_atom_is_an_error() {
        let err = parse_formula("free & bogus").unwrap_err();
        assert!(err.message.contains("unknown atom 'bogus'"), "{err}");
        assert_eq!(err.column, 8);
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_formula("!free & crossing | free ; free ; crossing").unwrap();
        let expected = Formula::chop(
            Formula::or(
                Formula::and(Formula::not(Formula::Free), Formula::CrossingAhead),
                Formula::Free,
            ),
            Formula::chop(Formula::Free, Formula::CrossingAhead),
        );
        assert_eq!(f, expected);
        assert_eq!(f.to_string(), "!free & crossing | free ; free ; crossing");
    }

    #[test]
    fn left_nested_chop_keeps_parentheses() {
        let f = parse_formula("(free ; free) ; free").unwrap();
        assert_eq!(f.to_string(), "(free ; free) ; free");
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn atoms_round_trip() {
        for src in [
            "aut(E)=1",
            "aut(M)=0",
            "sign(stop)",
            "sign(give_way)",
            "len < 2.5",
            "len = 0",
            "len > size(M) + 0.5",
            "re(E) ; sg(E) ; len >= 0",
        ] {
            let f = parse_formula(src).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f, "{src}");
        }
    }

    #[test]
    fn library_file_definitions() {
        let mut lib = Library::standard();
        lib.load("# gaps\nroom(A, B) := sg(A) & !re(B)\nclear := free\n")
            .unwrap();
        let f = parse_with("room(E, M) ; clear", &lib).unwrap();
        assert_eq!(
            f,
            Formula::chop(
                Formula::and(
                    Formula::and(Formula::Free, Formula::Len(Cmp::Ge, size_of("E"))),
                    Formula::not(Formula::Re("M".into()))
                ),
                Formula::Free
            )
        );
        let err = lib.load("ok := free\nbad := free &&").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn arity_and_literal_checks() {
        assert!(parse_formula("sg").is_err());
        assert!(parse_formula("aut(E)=2").is_err());
        assert!(parse_formula("len >= -1").is_err());
        assert!(parse_formula("sign(yield)").is_err());
    }
}
