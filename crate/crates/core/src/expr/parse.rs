//! Recursive-descent parser for model expressions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! The variable is `x`; `pi` is a constant unless shadowed by a parameter.
//! Implicit multiplication (`2x`, `a(x+1)`) is rejected.

use super::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_alphabetic() || c == '_' {
            while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                self.pos += self.peek().unwrap().len_utf8();
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        self.pos += c.len_utf8();
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(Error::Parse {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[start..i];
        self.pos = i;
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| Error::Parse {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if t != Tok::End {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::add(lhs, self.product()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.product()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::div(lhs, self.unary()?);
                }
                Tok::Num(_) | Tok::Ident(_) | Tok::LParen => {
                    return self.err("implicit multiplication is not supported; use `*`")
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::num(v)),
            Tok::LParen => {
                let e = self.sum()?;
                if self.peek() != &Tok::RParen {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(Expr::param(i));
                }
                if name == "x" {
                    return Ok(Expr::x());
                }
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != &Tok::LParen {
                        return self.err(format!("expected `(` after `{name}`"));
                    }
                    self.bump();
                    let arg = self.sum()?;
                    if self.peek() != &Tok::RParen {
                        return self.err("expected `)`");
                    }
                    self.bump();
                    return Ok(Expr::call(f, arg));
                }
                if name == "pi" {
                    return Ok(Expr::num(std::f64::consts::PI));
                }
                Err(Error::UnknownIdentifier { name, pos })
            }
            Tok::End => Err(Error::Parse {
                pos,
                msg: "unexpected end of expression".into(),
            }),
            Tok::Op(c) => Err(Error::Parse {
                pos,
                msg: format!("unexpected operator `{c}`"),
            }),
            Tok::RParen => Err(Error::Parse {
                pos,
                msg: "unexpected `)`".into(),
            }),
        }
    }
}

/// Parses `src` into an expression over `x` and the given parameter names.
pub fn parse(src: &str, param_names: &[String]) -> Result<Expr> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        names: param_names,
    };
    let e = p.sum()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => p.err("unbalanced `)`"),
        _ => p.err("unexpected token"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn ev(src: &str, x: f64) -> f64 {
        parse(src, &names(&["a"])).unwrap().eval(x, &[2.0], (0.0, 0.0))
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2*3", 0.0), 7.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("2*-x", 3.0), -6.0);
        assert_eq!(ev("8/2/2", 0.0), 2.0);
        assert_eq!(ev("a*x - 1e-1", 1.0), 1.9);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert!((ev("sin(pi/2)", 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reports_error_positions() {
        let n = names(&["a"]);
        assert_eq!(
            parse("2x", &n),
            Err(Error::Parse {
                pos: 1,
                msg: "implicit multiplication is not supported; use `*`".into()
            })
        );
        assert!(matches!(parse("a*(x+1", &n), Err(Error::Parse { pos: 6, .. })));
        assert!(matches!(parse("a + ", &n), Err(Error::Parse { pos: 4, .. })));
        assert!(matches!(parse("a $ x", &n), Err(Error::Parse { pos: 2, .. })));
        assert_eq!(
            parse("a*y", &n),
            Err(Error::UnknownIdentifier {
                name: "y".into(),
                pos: 2
            })
        );
        assert!(matches!(parse("sin x", &n), Err(Error::Parse { .. })));
        assert!(matches!(parse("(a))", &n), Err(Error::Parse { pos: 3, .. })));
    }
}
