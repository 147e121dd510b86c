//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | atom ('^' signed_rational)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! signed_rational := integer | '(' integer '/' integer ')'
//! ```
//!
//! Integers in exponents may carry a leading minus sign.

use std::collections::BTreeSet;

use num_rational::Rational64;
use thiserror::Error;

use super::{Expr, Func, JetVar, Node};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UndeclaredIdentifier(String),
    MalformedExponent(String),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at position {pos}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: usize,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(msg) => format!("syntax error: {msg}"),
        ParseErrorKind::UndeclaredIdentifier(id) => format!("undeclared identifier `{id}`"),
        ParseErrorKind::MalformedExponent(msg) => format!("malformed exponent: {msg}"),
    }
}

impl ParseError {
    /// Render the source with a caret under the error position.
    pub fn caret(&self, source: &str) -> String {
        format!("{source}\n{}^", " ".repeat(self.pos.min(source.len())))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = |t| Ok((t, start));
        match c {
            b'+' => {
                self.pos += 1;
                single(Tok::Plus)
            }
            b'-' => {
                self.pos += 1;
                single(Tok::Minus)
            }
            b'*' => {
                self.pos += 1;
                single(Tok::Star)
            }
            b'/' => {
                self.pos += 1;
                single(Tok::Slash)
            }
            b'^' => {
                self.pos += 1;
                single(Tok::Caret)
            }
            b'(' => {
                self.pos += 1;
                single(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                single(Tok::RParen)
            }
            b'0'..=b'9' | b'.' => self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                Ok((Tok::Ident(s.to_string()), start))
            }
            other => Err(ParseError {
                kind: ParseErrorKind::Syntax(format!("unexpected character `{}`", other as char)),
                pos: start,
            }),
        }
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let int_digits = digits(self);
        let mut is_int = true;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            is_int = false;
            let frac = digits(self);
            if int_digits == 0 && frac == 0 {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax("lone `.`".into()),
                    pos: start,
                });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent after all
                self.pos = save;
            } else {
                is_int = false;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if is_int {
            if let Ok(i) = text.parse::<i64>() {
                return Ok((Tok::Int(i), start));
            }
        }
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax(format!("bad number `{text}`")),
                pos: start,
            })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    params: &'a BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (t, p) = self.lexer.next()?;
        self.tok = t;
        self.tok_pos = p;
        Ok(())
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            kind: ParseErrorKind::Syntax(msg.into()),
            pos: self.tok_pos,
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == t {
            self.bump()
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = Expr::raw(Node::Add(lhs, rhs));
                }
                Tok::Minus => {
                    self.bump()?;
                    let rhs = self.term()?;
                    lhs = Expr::raw(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    let rhs = self.factor()?;
                    lhs = Expr::raw(Node::Mul(lhs, rhs));
                }
                Tok::Slash => {
                    self.bump()?;
                    let rhs = self.factor()?;
                    lhs = Expr::raw(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            let inner = self.factor()?;
            // negative literals are stored as constants
            return Ok(match inner.node() {
                Node::Const(c) => Expr::constant(-c),
                _ => Expr::raw(Node::Neg(inner)),
            });
        }
        let base = self.atom()?;
        if self.tok == Tok::Caret {
            self.bump()?;
            let r = self.signed_rational()?;
            return Ok(Expr::raw(Node::Pow(base, r)));
        }
        Ok(base)
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        let neg = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        match self.tok {
            Tok::Int(i) => {
                self.bump()?;
                Ok(if neg { -i } else { i })
            }
            _ => Err(ParseError {
                kind: ParseErrorKind::MalformedExponent("expected an integer".into()),
                pos: self.tok_pos,
            }),
        }
    }

    fn signed_rational(&mut self) -> Result<Rational64, ParseError> {
        if self.tok == Tok::LParen {
            self.bump()?;
            let num = self.signed_int()?;
            if self.tok != Tok::Slash {
                return Err(ParseError {
                    kind: ParseErrorKind::MalformedExponent("expected `/`".into()),
                    pos: self.tok_pos,
                });
            }
            self.bump()?;
            let den_pos = self.tok_pos;
            let den = self.signed_int()?;
            if den == 0 {
                return Err(ParseError {
                    kind: ParseErrorKind::MalformedExponent("zero denominator".into()),
                    pos: den_pos,
                });
            }
            if self.tok != Tok::RParen {
                return Err(ParseError {
                    kind: ParseErrorKind::MalformedExponent("expected `)`".into()),
                    pos: self.tok_pos,
                });
            }
            self.bump()?;
            Ok(Rational64::new(num, den))
        } else {
            Ok(Rational64::from_integer(self.signed_int()?))
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Int(i) => {
                self.bump()?;
                Ok(Expr::constant(i as f64))
            }
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::constant(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.tok_pos;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::raw(Node::Fn(func, arg)));
                }
                if let Some(v) = JetVar::from_ident(&name) {
                    return Ok(Expr::var(v));
                }
                if self.params.contains(&name) {
                    return Ok(Expr::param(&name));
                }
                Err(ParseError {
                    kind: ParseErrorKind::UndeclaredIdentifier(name),
                    pos,
                })
            }
            Tok::End => self.syntax("unexpected end of input"),
            other => self.syntax(format!("unexpected token {other:?}")),
        }
    }
}

/// Parse `source` with the given declared parameter names.
pub fn parse(source: &str, declared_params: &BTreeSet<String>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        tok_pos: 0,
        params: declared_params,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.syntax("trailing input");
    }
    Ok(e)
}
