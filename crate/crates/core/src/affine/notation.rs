//! Textual and JSON forms of sets and relations.
//!
//! Grammar of the textual form:
//!
//! ```text
//! top   := ( "[" names "]" "->" )? "{" tuple ( "->" tuple )? ( ":" disj )? "}"
//! tuple := "[" names "]"
//! disj  := conj ( "or" conj )*
//! conj  := atom ( "and" atom )*
//! atom  := "(" disj ")" | "true" | "false" | expr ( cmp expr )+
//! cmp   := "<" | "<=" | ">" | ">=" | "="
//! expr  := [-] term ( ("+" | "-") term )*
//! term  := INT | INT "*"? NAME | NAME
//! ```
//!
//! The optional prefix lists parameters. Names may carry trailing `'`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{write_terms, AffineExpr};
use super::poly::Conj;
use super::rel::IntRel;
use super::set::{conj_from, Constraint, ConstraintKind, IntSet, Space};
use super::AffineError;

fn write_constraint(f: &mut impl fmt::Write, c: &Constraint) -> fmt::Result {
    let pos: Vec<(&str, i64)> = c.expr.terms().filter(|(_, v)| *v > 0).collect();
    let neg: Vec<(&str, i64)> = c.expr.terms().filter(|(_, v)| *v < 0).map(|(n, v)| (n, -v)).collect();
    let k = c.expr.constant_term();
    match c.kind {
        ConstraintKind::Zero => {
            // pos + k = neg  →  pos = neg - k
            write_terms(f, pos.into_iter(), 0)?;
            f.write_str(" = ")?;
            write_terms(f, neg.into_iter(), -k)
        }
        ConstraintKind::NonNegative => {
            // pos + k >= neg
            if neg.is_empty() {
                write_terms(f, pos.into_iter(), 0)?;
                f.write_str(" >= ")?;
                write!(f, "{}", -k)
            } else if k < 0 {
                write_terms(f, neg.into_iter(), -k - 1)?;
                f.write_str(" < ")?;
                write_terms(f, pos.into_iter(), 0)
            } else {
                write_terms(f, neg.into_iter(), 0)?;
                f.write_str(" <= ")?;
                write_terms(f, pos.into_iter(), k)
            }
        }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, pieces: &[Vec<Constraint>]) -> fmt::Result {
    if pieces.is_empty() {
        return f.write_str(" : false }");
    }
    if pieces.len() == 1 && pieces[0].is_empty() {
        return f.write_str(" }");
    }
    f.write_str(" : ")?;
    let multi = pieces.len() > 1;
    for (n, piece) in pieces.iter().enumerate() {
        if n > 0 {
            f.write_str(" or ")?;
        }
        if multi {
            f.write_str("(")?;
        }
        if piece.is_empty() {
            f.write_str("true")?;
        }
        for (m, c) in piece.iter().enumerate() {
            if m > 0 {
                f.write_str(" and ")?;
            }
            write_constraint(f, c)?;
        }
        if multi {
            f.write_str(")")?;
        }
    }
    f.write_str(" }")
}

fn write_params(f: &mut fmt::Formatter<'_>, params: &[String]) -> fmt::Result {
    if !params.is_empty() {
        write!(f, "[{}] -> ", params.join(", "))?;
    }
    Ok(())
}

impl fmt::Display for IntSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_params(f, &self.space.params)?;
        write!(f, "{{ [{}]", self.space.dims.join(", "))?;
        write_body(f, &self.pieces())
    }
}

impl fmt::Display for IntRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_params(f, &self.params)?;
        write!(f, "{{ [{}] -> [{}]", self.inputs.join(", "), self.outputs.join(", "))?;
        write_body(f, &self.as_set().pieces())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Int(i64),
    Sym(&'static str),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, AffineError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i].parse().map_err(|_| AffineError::Parse { pos: start, msg: "integer out of range".into() })?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            out.push((start, Tok::Name(text[start..i].to_string())));
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let sym: &'static str = match two {
            "->" => "->",
            "<=" => "<=",
            ">=" => ">=",
            _ => match c {
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                '(' => "(",
                ')' => ")",
                ':' => ":",
                ',' => ",",
                '+' => "+",
                '-' => "-",
                '*' => "*",
                '<' => "<",
                '>' => ">",
                '=' => "=",
                _ => return Err(AffineError::Parse { pos: i, msg: format!("unexpected character `{c}`") }),
            },
        };
        i += sym.len();
        out.push((start, Tok::Sym(sym)));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

type Disj = Vec<Vec<Constraint>>;

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, AffineError> {
        Err(AffineError::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Name(n)) if n == word) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), AffineError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn names(&mut self) -> Result<Vec<String>, AffineError> {
        self.expect("[")?;
        let mut out = Vec::new();
        if self.eat("]") {
            return Ok(out);
        }
        loop {
            match self.peek().cloned() {
                Some(Tok::Name(n)) => {
                    self.at += 1;
                    out.push(n);
                }
                _ => return self.err("expected a name"),
            }
            if self.eat("]") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn term(&mut self) -> Result<AffineExpr, AffineError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.at += 1;
                let explicit = self.eat("*");
                if let Some(Tok::Name(n)) = self.peek().cloned() {
                    if !matches!(n.as_str(), "and" | "or") {
                        self.at += 1;
                        return Ok(AffineExpr::term(n, v));
                    }
                }
                if explicit {
                    return self.err("expected a name after `*`");
                }
                Ok(AffineExpr::constant(v))
            }
            Some(Tok::Name(n)) => {
                self.at += 1;
                Ok(AffineExpr::var(n))
            }
            _ => self.err("expected a term"),
        }
    }

    fn expr(&mut self) -> Result<AffineExpr, AffineError> {
        let mut acc = if self.eat("-") { -self.term()? } else { self.term()? };
        loop {
            if self.eat("+") {
                acc = acc + self.term()?;
            } else if self.eat("-") {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn cmp(&mut self) -> Option<&'static str> {
        for s in ["<=", ">=", "<", ">", "="] {
            if self.eat(s) {
                return Some(s);
            }
        }
        None
    }

    fn atom(&mut self) -> Result<Disj, AffineError> {
        if self.eat("(") {
            let d = self.disj()?;
            self.expect(")")?;
            return Ok(d);
        }
        if self.eat_word("true") {
            return Ok(vec![vec![]]);
        }
        if self.eat_word("false") {
            return Ok(vec![]);
        }
        let mut lhs = self.expr()?;
        let mut cs = Vec::new();
        while let Some(op) = self.cmp() {
            let rhs = self.expr()?;
            cs.push(match op {
                "<=" => Constraint::le(lhs, rhs.clone()),
                ">=" => Constraint::ge(lhs, rhs.clone()),
                "<" => Constraint::lt(lhs, rhs.clone()),
                ">" => Constraint::lt(rhs.clone(), lhs),
                _ => Constraint::eq(lhs, rhs.clone()),
            });
            lhs = rhs;
        }
        if cs.is_empty() {
            return self.err("expected a comparison");
        }
        Ok(vec![cs])
    }

    fn conj(&mut self) -> Result<Disj, AffineError> {
        let mut acc = self.atom()?;
        while self.eat_word("and") {
            let rhs = self.atom()?;
            let mut next = Vec::new();
            for a in &acc {
                for b in &rhs {
                    next.push(a.iter().chain(b).cloned().collect());
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    fn disj(&mut self) -> Result<Disj, AffineError> {
        let mut acc = self.conj()?;
        while self.eat_word("or") {
            acc.extend(self.conj()?);
        }
        Ok(acc)
    }

    /// Parameters, input tuple, optional output tuple, constraint pieces.
    fn top(&mut self) -> Result<(Vec<String>, Vec<String>, Option<Vec<String>>, Disj), AffineError> {
        let mut params = Vec::new();
        if matches!(self.peek(), Some(Tok::Sym("["))) {
            params = self.names()?;
            self.expect("->")?;
        }
        self.expect("{")?;
        let ins = self.names()?;
        let outs = if self.eat("->") { Some(self.names()?) } else { None };
        let body = if self.eat(":") { self.disj()? } else { vec![vec![]] };
        self.expect("}")?;
        if self.at != self.toks.len() {
            return self.err("trailing input");
        }
        Ok((params, ins, outs, body))
    }
}

fn pieces_in(space: &Space, body: &Disj) -> Result<Vec<Conj>, AffineError> {
    body.iter().map(|cs| conj_from(space, cs)).collect()
}

fn run(text: &str) -> Result<(Vec<String>, Vec<String>, Option<Vec<String>>, Disj), AffineError> {
    let toks = lex(text)?;
    Parser { toks, at: 0, end: text.len() }.top()
}

pub fn parse_set(text: &str) -> Result<IntSet, AffineError> {
    let (params, dims, outs, body) = run(text)?;
    if outs.is_some() {
        return Err(AffineError::Parse { pos: 0, msg: "expected a set, found a relation".into() });
    }
    let space = Space { dims, params };
    let pieces = pieces_in(&space, &body)?;
    Ok(IntSet::from_pieces(space, pieces))
}

pub fn parse_rel(text: &str) -> Result<IntRel, AffineError> {
    let (params, ins, outs, body) = run(text)?;
    let Some(outs) = outs else {
        return Err(AffineError::Parse { pos: 0, msg: "expected a relation, found a set".into() });
    };
    let n_in = ins.len();
    let space = Space { dims: ins.into_iter().chain(outs).collect(), params };
    let pieces = pieces_in(&space, &body)?;
    IntRel::from_set(&IntSet::from_pieces(space, pieces), n_in)
}

/// Matrix form: each row holds coefficients over `dims ++ params` then the constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetJson {
    pub dims: Vec<String>,
    pub params: Vec<String>,
    pub pieces: Vec<PieceJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceJson {
    /// Rows constrained to `= 0`.
    pub equalities: Vec<Vec<i64>>,
    /// Rows constrained to `>= 0`.
    pub inequalities: Vec<Vec<i64>>,
}

impl IntSet {
    pub fn to_json(&self) -> SetJson {
        SetJson {
            dims: self.space.dims.clone(),
            params: self.space.params.clone(),
            pieces: self.pieces.iter().map(|p| PieceJson { equalities: p.eqs.clone(), inequalities: p.ineqs.clone() }).collect(),
        }
    }

    pub fn from_json(json: &SetJson) -> Result<IntSet, AffineError> {
        let space = Space { dims: json.dims.clone(), params: json.params.clone() };
        let n = space.ncols();
        let mut pieces = Vec::new();
        for p in &json.pieces {
            let mut conj = Conj::universe(n);
            for row in p.equalities.iter().chain(&p.inequalities) {
                if row.len() != n + 1 {
                    return Err(AffineError::DimensionMismatch { expected: n + 1, found: row.len() });
                }
            }
            p.equalities.iter().for_each(|r| conj.add_eq(r.clone()));
            p.inequalities.iter().for_each(|r| conj.add_ineq(r.clone()));
            pieces.push(conj);
        }
        Ok(IntSet::from_pieces(space, pieces))
    }
}
