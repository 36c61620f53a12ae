//! Lexer and recursive-descent parser for `.scop` files.

use super::FrontendError;
use crate::ir::Operator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

const PUNCT: &[&str] = &[
    "++", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "<=", "(", ")", "{", "}", "[", "]", ";", ",", ":", "=", "<", "+", "-", "*", "/",
    "&", "|", "^", "?",
];

fn lex(text: &str) -> Result<Vec<(Pos, Tok)>, FrontendError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse().map_err(|_| FrontendError::Syntax { line, col, msg: format!("integer `{s}` out of range") })?;
            col += i - start;
            out.push((pos, Tok::Int(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((pos, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
            return Err(FrontendError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
        };
        i += p.len();
        col += p.len();
        out.push((pos, Tok::Punct(p)));
    }
    out.push((Pos { line, col }, Tok::Eof));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Num(i64),
    Ident(String),
    Index(String, Vec<Expr>),
    Bin(Operator, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub extents: Vec<Option<Expr>>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Decl(Decl),
    Loop { iter: String, lower: Expr, upper: Expr, inclusive: bool, body: Vec<Item>, pos: Pos },
    Assign { label: Option<String>, array: String, subs: Vec<Expr>, op: Option<Operator>, value: Expr, pos: Pos },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Item>,
}

struct Parser {
    toks: Vec<(Pos, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].1
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, FrontendError> {
        let p = self.pos();
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(FrontendError::Syntax { line: p.line, col: p.col, msg: format!("{}, found {found}", msg.into()) })
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), FrontendError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.fail(format!("expected `{p}`"))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail("expected an identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), FrontendError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.fail(format!("expected `{kw}`")),
        }
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        self.keyword("scop")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                params.push(self.ident()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let body = self.block()?;
        if *self.peek() != Tok::Eof {
            return self.fail("expected end of input");
        }
        Ok(Program { name, params, body })
    }

    fn block(&mut self) -> Result<Vec<Item>, FrontendError> {
        self.expect("{")?;
        let mut items = Vec::new();
        while !self.eat("}") {
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<Item, FrontendError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "int" => {
                self.bump();
                let name = self.ident()?;
                let mut extents = Vec::new();
                while self.eat("[") {
                    if self.eat("?") {
                        extents.push(None);
                    } else {
                        extents.push(Some(self.expr()?));
                    }
                    self.expect("]")?;
                }
                self.expect(";")?;
                Ok(Item::Decl(Decl { name, extents, pos }))
            }
            Tok::Ident(kw) if kw == "for" => {
                self.bump();
                self.expect("(")?;
                let iter = self.ident()?;
                self.expect("=")?;
                let lower = self.expr()?;
                self.expect(";")?;
                let cond_pos = self.pos();
                if self.ident()? != iter {
                    return Err(FrontendError::Syntax { line: cond_pos.line, col: cond_pos.col, msg: format!("loop condition must test `{iter}`") });
                }
                let inclusive = if self.eat("<=") {
                    true
                } else if self.eat("<") {
                    false
                } else {
                    return self.fail("expected `<` or `<=`");
                };
                let upper = self.expr()?;
                self.expect(";")?;
                let inc_pos = self.pos();
                if self.ident()? != iter {
                    return Err(FrontendError::Syntax { line: inc_pos.line, col: inc_pos.col, msg: format!("loop increment must be `{iter}++`") });
                }
                self.expect("++")?;
                self.expect(")")?;
                let body = if matches!(self.peek(), Tok::Punct("{")) { self.block()? } else { vec![self.item()?] };
                Ok(Item::Loop { iter, lower, upper, inclusive, body, pos })
            }
            Tok::Ident(_) => {
                let label = if *self.peek2() == Tok::Punct(":") {
                    let l = self.ident()?;
                    self.bump();
                    Some(l)
                } else {
                    None
                };
                let pos = self.pos();
                let array = self.ident()?;
                let mut subs = Vec::new();
                while self.eat("[") {
                    subs.push(self.expr()?);
                    self.expect("]")?;
                }
                let op = match self.bump() {
                    Tok::Punct("=") => None,
                    Tok::Punct("+=") => Some(Operator::Add),
                    Tok::Punct("-=") => Some(Operator::Sub),
                    Tok::Punct("*=") => Some(Operator::Mul),
                    Tok::Punct("/=") => Some(Operator::Div),
                    Tok::Punct("&=") => Some(Operator::And),
                    Tok::Punct("|=") => Some(Operator::Or),
                    Tok::Punct("^=") => Some(Operator::Xor),
                    _ => {
                        self.at -= 1;
                        return self.fail("expected an assignment operator");
                    }
                };
                let value = self.expr()?;
                self.expect(";")?;
                Ok(Item::Assign { label, array, subs, op, value, pos })
            }
            _ => self.fail("expected a declaration, loop or statement"),
        }
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, FrontendError> {
        const LEVELS: &[&[(&str, Operator)]] = &[
            &[("|", Operator::Or)],
            &[("^", Operator::Xor)],
            &[("&", Operator::And)],
            &[("+", Operator::Add), ("-", Operator::Sub)],
            &[("*", Operator::Mul), ("/", Operator::Div)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (p, op) in LEVELS[level] {
                if matches!(self.peek(), Tok::Punct(q) if q == p) {
                    let pos = self.pos();
                    self.bump();
                    let rhs = self.binary(level + 1)?;
                    lhs = Expr { kind: ExprKind::Bin(*op, Box::new(lhs), Box::new(rhs)), pos };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.pos();
        if self.eat("-") {
            let inner = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), pos });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Num(v), pos })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if (name == "min" || name == "max") && self.eat("(") {
                    let a = self.expr()?;
                    self.expect(",")?;
                    let b = self.expr()?;
                    self.expect(")")?;
                    let op = if name == "min" { Operator::Min } else { Operator::Max };
                    return Ok(Expr { kind: ExprKind::Bin(op, Box::new(a), Box::new(b)), pos });
                }
                if matches!(self.peek(), Tok::Punct("[")) {
                    let mut subs = Vec::new();
                    while self.eat("[") {
                        subs.push(self.expr()?);
                        self.expect("]")?;
                    }
                    return Ok(Expr { kind: ExprKind::Index(name, subs), pos });
                }
                Ok(Expr { kind: ExprKind::Ident(name), pos })
            }
            _ => self.fail("expected an expression"),
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, FrontendError> {
    let toks = lex(text)?;
    Parser { toks, at: 0 }.program()
}
