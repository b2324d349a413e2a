//! Query syntax tree, recursive-descent parser and canonical renderings.
//!
//! ```text
//! query   := clause ('then' clause)*
//! clause  := and_expr ('or' and_expr)*
//! and_expr:= unary ('and' unary)*
//! unary   := 'not' unary | '(' clause ')' | atom
//! atom    := IDENT '(' IDENT (',' IDENT)* (',' IDENT '=' NUMBER)* ')'
//! ```

use std::fmt;
use std::str::FromStr;

use super::lexer::{tokenize, Token, TokenKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Crossing,
    AnteriorOf,
    PosteriorOf,
    InferiorOf,
    SuperiorOf,
    LateralOf,
    MedialOf,
    Between,
    Near,
    ConnectedAbout,
}

impl Relation {
    pub const ALL: [Relation; 10] = [
        Relation::Crossing,
        Relation::AnteriorOf,
        Relation::PosteriorOf,
        Relation::InferiorOf,
        Relation::SuperiorOf,
        Relation::LateralOf,
        Relation::MedialOf,
        Relation::Between,
        Relation::Near,
        Relation::ConnectedAbout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Crossing => "crossing",
            Relation::AnteriorOf => "anterior_of",
            Relation::PosteriorOf => "posterior_of",
            Relation::InferiorOf => "inferior_of",
            Relation::SuperiorOf => "superior_of",
            Relation::LateralOf => "lateral_of",
            Relation::MedialOf => "medial_of",
            Relation::Between => "between",
            Relation::Near => "near",
            Relation::ConnectedAbout => "connected_about",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Relation::Between => 2,
            _ => 1,
        }
    }

    /// Numeric parameters accepted as `name=value`.
    pub fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Relation::Crossing => &["radius"],
            Relation::AnteriorOf
            | Relation::PosteriorOf
            | Relation::InferiorOf
            | Relation::SuperiorOf
            | Relation::LateralOf
            | Relation::MedialOf => &["aperture", "margin"],
            Relation::Between => &["aperture"],
            Relation::Near => &["inner", "outer"],
            Relation::ConnectedAbout => &["n", "w"],
        }
    }

    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            Relation::ConnectedAbout => &["n", "w"],
            _ => &[],
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown relation '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub relation: Relation,
    pub args: Vec<String>,
    pub params: Vec<(String, f64)>,
}

impl Atom {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.relation, self.args.join(", "))?;
        for (k, v) in &self.params {
            write!(f, ", {k}={v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Atom(Atom),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 0,
            Expr::And(..) => 1,
            Expr::Not(_) | Expr::Atom(_) => 2,
        }
    }

    fn fmt_child(&self, child: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Expr::Atom(a) => out.push(a),
            Expr::Not(e) => e.collect_atoms(out),
            Expr::And(l, r) | Expr::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// S-expression rendering used by `parse --dump-ast`.
    pub fn sexpr(&self) -> String {
        match self {
            Expr::Atom(a) => {
                let mut s = format!("(atom {}", a.relation);
                for arg in &a.args {
                    s.push(' ');
                    s.push_str(arg);
                }
                for (k, v) in &a.params {
                    s.push_str(&format!(" :{k} {v}"));
                }
                s.push(')');
                s
            }
            Expr::Not(e) => format!("(not {})", e.sexpr()),
            Expr::And(l, r) => format!("(and {} {})", l.sexpr(), r.sexpr()),
            Expr::Or(l, r) => format!("(or {} {})", l.sexpr(), r.sexpr()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Not(e) => {
                f.write_str("not ")?;
                self.fmt_child(e, 2, f)
            }
            // Left-associative: the right operand needs parentheses at equal precedence.
            Expr::And(l, r) => {
                self.fmt_child(l, 1, f)?;
                f.write_str(" and ")?;
                self.fmt_child(r, 2, f)
            }
            Expr::Or(l, r) => {
                self.fmt_child(l, 0, f)?;
                f.write_str(" or ")?;
                self.fmt_child(r, 1, f)
            }
        }
    }
}

/// A chain of clauses joined by `then`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub clauses: Vec<Expr>,
}

impl QueryAst {
    pub fn dump(&self) -> String {
        let mut s = format!("(query {}\n", self.clauses.len());
        for c in &self.clauses {
            s.push_str("  ");
            s.push_str(&c.sexpr());
            s.push('\n');
        }
        s.push(')');
        s
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("\nthen ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst> {
    parse(&tokenize(text)?)
}

pub fn parse(tokens: &[Token]) -> Result<QueryAst> {
    let mut p = Parser { tokens, pos: 0 };
    let mut clauses = vec![p.clause()?];
    while p.eat(&TokenKind::Then) {
        clauses.push(p.clause()?);
    }
    if let Some(t) = p.peek() {
        return Err(p.error_at(t, format!("unexpected {}", t.kind)));
    }
    Ok(QueryAst { clauses })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error_at(&self, t: &Token, message: String) -> Error {
        Error::Parse {
            line: t.line,
            column: t.column,
            message,
        }
    }

    fn error_here(&self, message: String) -> Error {
        match self.peek() {
            Some(t) => self.error_at(t, message),
            None => {
                let Some(last) = self.tokens.last() else {
                    return Error::Parse {
                        line: 1,
                        column: 1,
                        message: format!("{message}, found empty query"),
                    };
                };
                Error::Parse {
                    line: last.line,
                    column: last.column,
                    message: format!("{message} after {}, found end of input", last.kind),
                }
            }
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'a Token> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.error_at(t, format!("expected {kind}, found {}", t.kind))),
            None => Err(self.error_here(format!("expected {kind}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, &'a Token)> {
        match self.peek() {
            Some(t @ Token { kind: TokenKind::Ident(s), .. }) => {
                self.pos += 1;
                Ok((s.clone(), t))
            }
            Some(t) => Err(self.error_at(t, format!("expected {what}, found {}", t.kind))),
            None => Err(self.error_here(format!("expected {what}"))),
        }
    }

    fn clause(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&TokenKind::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(&TokenKind::And) {
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&TokenKind::Not) {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat(&TokenKind::LParen) {
            let inner = self.clause()?;
            self.expect(TokenKind::RParen)?;
            return Ok(inner);
        }
        self.atom().map(Expr::Atom)
    }

    fn atom(&mut self) -> Result<Atom> {
        let (name, name_tok) = self.ident("relation name")?;
        let relation: Relation = name.parse().map_err(|_| {
            let known: Vec<&str> = Relation::ALL.iter().map(|r| r.name()).collect();
            self.error_at(
                name_tok,
                format!("unknown relation '{name}' (known: {})", known.join(", ")),
            )
        })?;
        self.expect(TokenKind::LParen)?;
        let mut args = vec![self.ident("structure name")?.0];
        let mut params: Vec<(String, f64)> = Vec::new();
        while self.eat(&TokenKind::Comma) {
            let (word, tok) = self.ident("structure name or parameter")?;
            if self.eat(&TokenKind::Equals) {
                let value = match self.peek() {
                    Some(Token { kind: TokenKind::Number(v), .. }) => {
                        self.pos += 1;
                        *v
                    }
                    _ => return Err(self.error_here(format!("expected number for '{word}'"))),
                };
                if !relation.allowed_params().contains(&word.as_str()) {
                    return Err(self.error_at(
                        tok,
                        format!(
                            "{relation} does not take parameter '{word}' (allowed: {})",
                            relation.allowed_params().join(", ")
                        ),
                    ));
                }
                if params.iter().any(|(k, _)| *k == word) {
                    return Err(self.error_at(tok, format!("parameter '{word}' given twice")));
                }
                params.push((word, value));
            } else if !params.is_empty() {
                return Err(self.error_at(tok, "structure names must precede parameters".into()));
            } else {
                args.push(word);
            }
        }
        let close = self.expect(TokenKind::RParen)?;
        if args.len() != relation.arity() {
            return Err(self.error_at(
                name_tok,
                format!(
                    "{relation} takes {} structure(s), got {}",
                    relation.arity(),
                    args.len()
                ),
            ));
        }
        for req in relation.required_params() {
            if !params.iter().any(|(k, _)| k == req) {
                return Err(self.error_at(close, format!("{relation} requires parameter '{req}'")));
            }
        }
        Ok(Atom {
            relation,
            args,
            params,
        })
    }
}
