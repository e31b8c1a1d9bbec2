//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! formula   := conj ;
//! conj      := unary { "&&" unary } ;
//! unary     := "true" | pred | "!" pred | temporal | "(" formula ")" ;
//! temporal  := ("F"|"G") "[" num "," num "]" "(" conj ")"
//!            | "(" conj ")" "U" "[" num "," num "]" "(" conj ")" ;
//! pred      := "ball(" vec "," num ")" | "clear(" ident "," num ")" | "half(" vec "," num ")" ;
//! vec       := "[" num { "," num } "]" ;
//! ```
//!
//! `ball` additionally accepts a waypoint name in place of the center vector
//! when parsed through [`parse_formula_with`].

use std::fmt;

use thiserror::Error;

use super::{Formula, Interval, Predicate};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    /// Formula outside the supported fragment; names the offending node.
    Fragment(String),
    Unbounded,
    InvalidInterval(String),
    InvalidPredicate(String),
    UnknownWaypoint(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::Fragment(m) => write!(f, "fragment violation: {m}"),
            ParseErrorKind::Unbounded => write!(f, "temporal intervals must be bounded"),
            ParseErrorKind::InvalidInterval(m) => write!(f, "invalid interval: {m}"),
            ParseErrorKind::InvalidPredicate(m) => write!(f, "invalid predicate: {m}"),
            ParseErrorKind::UnknownWaypoint(w) => write!(f, "unknown waypoint `{w}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    AndAnd,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::AndAnd => f.write_str("`&&`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let err = |m: String| ParseError {
            kind: ParseErrorKind::Syntax(m),
            line: start_line,
            column: start_col,
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '!' => Some(Tok::Bang),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned {
                tok,
                line,
                column: col,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '&' {
            if chars.get(i + 1) == Some(&'&') {
                out.push(Spanned {
                    tok: Tok::AndAnd,
                    line,
                    column: col,
                });
                i += 2;
                col += 2;
                continue;
            }
            return Err(err("expected `&&`".into()));
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && chars
                    .get(i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let begin = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let lit: String = chars[begin..i].iter().collect();
            let value: f64 = lit
                .parse()
                .map_err(|_| err(format!("malformed number `{lit}`")))?;
            out.push(Spanned {
                tok: Tok::Num(value),
                line,
                column: col,
            });
            col += i - begin;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[begin..i].iter().collect();
            out.push(Spanned {
                tok: Tok::Ident(word),
                line,
                column: col,
            });
            col += i - begin;
            continue;
        }
        return Err(err(format!("unexpected character `{c}`")));
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

type Resolver<'a> = &'a dyn Fn(&str) -> Option<Vec<f64>>;

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    waypoints: Resolver<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_ident(&self) -> Option<&str> {
        match &self.peek().tok {
            Tok::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, at: &Spanned, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: at.line,
            column: at.column,
        }
    }

    fn syntax<T>(&self, msg: String) -> Result<T, ParseError> {
        Err(self.error_at(self.peek(), ParseErrorKind::Syntax(msg)))
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            self.syntax(format!("expected {tok}, found {}", self.peek().tok))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().tok.clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            Tok::Ident(w) if w == "inf" || w == "infinity" => {
                Err(self.error_at(self.peek(), ParseErrorKind::Unbounded))
            }
            other => self.syntax(format!("expected a number, found {other}")),
        }
    }

    fn vector(&mut self) -> Result<Vec<f64>, ParseError> {
        self.expect(Tok::LBracket)?;
        let mut v = vec![self.number()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            v.push(self.number()?);
        }
        self.expect(Tok::RBracket)?;
        Ok(v)
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let open = self.expect(Tok::LBracket)?;
        let a = self.number()?;
        self.expect(Tok::Comma)?;
        let b = self.number()?;
        self.expect(Tok::RBracket)?;
        Interval::new(a, b).map_err(|m| self.error_at(&open, ParseErrorKind::InvalidInterval(m)))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let first = self.unary()?;
        let mut acc = first;
        while self.peek().tok == Tok::AndAnd {
            self.bump();
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn is_predicate_keyword(word: &str) -> bool {
        matches!(word, "ball" | "clear" | "half")
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let here = self.peek().clone();
        match &here.tok {
            Tok::Ident(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(w) if Self::is_predicate_keyword(w) => Ok(Formula::Pred(self.predicate()?)),
            Tok::Ident(w) if w == "F" || w == "G" => {
                let is_f = w == "F";
                self.bump();
                let interval = self.interval()?;
                self.expect(Tok::LParen)?;
                let inner_at = self.peek().clone();
                let inner = self.formula()?;
                self.expect(Tok::RParen)?;
                if !inner.is_state_formula() {
                    let op = if is_f { "F" } else { "G" };
                    return Err(self.error_at(
                        &inner_at,
                        ParseErrorKind::Fragment(format!("temporal operator nested inside {op}")),
                    ));
                }
                Ok(if is_f {
                    Formula::eventually(interval, inner)
                } else {
                    Formula::always(interval, inner)
                })
            }
            Tok::Bang => {
                self.bump();
                let target = self.peek().clone();
                match self.peek_ident() {
                    Some(w) if Self::is_predicate_keyword(w) => Ok(Formula::Not(self.predicate()?)),
                    Some(w) if w == "F" || w == "G" || w == "true" => Err(self.error_at(
                        &target,
                        ParseErrorKind::Fragment(format!("negation applied to `{w}`")),
                    )),
                    _ if target.tok == Tok::LParen || target.tok == Tok::Bang => Err(self
                        .error_at(
                            &target,
                            ParseErrorKind::Fragment(
                                "negation applies only to a predicate".to_string(),
                            ),
                        )),
                    _ => self.syntax(format!(
                        "expected a predicate after `!`, found {}",
                        target.tok
                    )),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.formula()?;
                self.expect(Tok::RParen)?;
                if self.peek_ident() == Some("U") {
                    let u_at = self.bump();
                    let interval = self.interval()?;
                    self.expect(Tok::LParen)?;
                    let rhs = self.formula()?;
                    self.expect(Tok::RParen)?;
                    if !inner.is_state_formula() || !rhs.is_state_formula() {
                        return Err(self.error_at(
                            &u_at,
                            ParseErrorKind::Fragment("temporal operator nested inside U".into()),
                        ));
                    }
                    return Ok(Formula::until(interval, inner, rhs));
                }
                Ok(inner)
            }
            other => self.syntax(format!("expected a formula, found {other}")),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let head = self.bump();
        let Tok::Ident(kind) = head.tok.clone() else {
            unreachable!("predicate() called on a non-keyword token");
        };
        self.expect(Tok::LParen)?;
        let invalid =
            |p: &Parser, m: String| p.error_at(&head, ParseErrorKind::InvalidPredicate(m));
        let pred = match kind.as_str() {
            "ball" => {
                let center = if let Some(name) = self.peek_ident().map(str::to_owned) {
                    let at = self.bump();
                    (self.waypoints)(&name)
                        .ok_or_else(|| self.error_at(&at, ParseErrorKind::UnknownWaypoint(name)))?
                } else {
                    self.vector()?
                };
                self.expect(Tok::Comma)?;
                let eps = self.number()?;
                Predicate::ball(center, eps).map_err(|m| invalid(self, m))?
            }
            "clear" => {
                let id = match self.bump().tok {
                    Tok::Ident(s) => s,
                    other => return self.syntax(format!("expected an obstacle id, found {other}")),
                };
                self.expect(Tok::Comma)?;
                let d = self.number()?;
                Predicate::clearance(id, d).map_err(|m| invalid(self, m))?
            }
            _ => {
                let normal = self.vector()?;
                self.expect(Tok::Comma)?;
                let offset = self.number()?;
                Predicate::halfspace(normal, offset).map_err(|m| invalid(self, m))?
            }
        };
        self.expect(Tok::RParen)?;
        Ok(pred)
    }
}

/// Parses a formula whose ball centers are numeric vectors.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_formula_with(text, &|_| None)
}

/// Parses a formula, resolving named ball centers through `waypoints`.
pub fn parse_formula_with(
    text: &str,
    waypoints: &dyn Fn(&str) -> Option<Vec<f64>>,
) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        waypoints,
    };
    let f = p.formula()?;
    if p.peek().tok != Tok::Eof {
        return p.syntax(format!("unexpected {} after formula", p.peek().tok));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(x: f64, y: f64, eps: f64) -> Predicate {
        Predicate::ball(vec![x, y], eps).unwrap()
    }

    #[test]
    fn parses_eventually_ball() {
        let f = parse_formula("F[0,10](ball([9,3], 0.2))").unwrap();
        assert_eq!(
            f,
            Formula::eventually(
                Interval::new(0.0, 10.0).unwrap(),
                Formula::Pred(ball(9.0, 3.0, 0.2))
            )
        );
    }

    #[test]
    fn parses_true() {
        assert_eq!(parse_formula("true").unwrap(), Formula::True);
        assert_eq!(parse_formula("  ( true )  ").unwrap(), Formula::True);
    }

    #[test]
    fn parses_conjunction_of_tasks() {
        let f = parse_formula("G[0,5](!ball([0,0],1)) && F[2,4](ball([1,1],0.5))").unwrap();
        let expected = Formula::and(
            Formula::always(
                Interval::new(0.0, 5.0).unwrap(),
                Formula::Not(ball(0.0, 0.0, 1.0)),
            ),
            Formula::eventually(
                Interval::new(2.0, 4.0).unwrap(),
                Formula::Pred(ball(1.0, 1.0, 0.5)),
            ),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn parses_until_and_other_predicates() {
        let f = parse_formula("(half([0,1], 5) && clear(o1, 0.5)) U[1,2.5e0](ball([-1,2], 3))")
            .unwrap();
        match f {
            Formula::Until(i, l, r) => {
                assert_eq!((i.a(), i.b()), (1.0, 2.5));
                assert!(matches!(*l, Formula::And(..)));
                assert_eq!(*r, Formula::Pred(ball(-1.0, 2.0, 3.0)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negated_temporal_is_a_fragment_violation() {
        let e = parse_formula("!F[0,1](ball([0,0],1))").unwrap_err();
        assert_eq!(
            e.kind,
            ParseErrorKind::Fragment("negation applied to `F`".into())
        );
        assert_eq!((e.line, e.column), (1, 2));
    }

    #[test]
    fn nested_temporal_is_a_fragment_violation() {
        let e = parse_formula("G[0,5](F[0,1](ball([0,0],1)))").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Fragment(_)));
    }

    #[test]
    fn unbounded_interval_rejected() {
        let e = parse_formula("F[0,inf](ball([0,0],1))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unbounded);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_formula("F[0,10](ball([9,3], 0.2)\n  && ?").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_formula("F[0,10](ball([9,3], 0.2)) &&\n   G[1,0](true)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidInterval(_)));
        assert_eq!((e.line, e.column), (2, 5));
    }

    #[test]
    fn resolves_waypoints() {
        let f = parse_formula_with("F[0,10](ball(home_pose, 0.2))", &|name| {
            (name == "home_pose").then(|| vec![9.0, 3.0])
        })
        .unwrap();
        assert_eq!(format!("{f}"), "F[0,10](ball([9,3], 0.2))");
        let e = parse_formula("F[0,10](ball(home_pose, 0.2))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownWaypoint("home_pose".into()));
    }

    #[test]
    fn invalid_predicate_parameters() {
        let e = parse_formula("F[0,1](ball([0,0], -1))").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidPredicate(_)));
        let e = parse_formula("F[0,1](half([1,1], 0))").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidPredicate(_)));
    }
}
