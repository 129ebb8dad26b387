//! Parser for the textual polynomial form, e.g. `"3m1x^2 + 6m2x + 6m3"` or
//! `"(x+1)^2 - 1/2m1"`. Juxtaposition multiplies, `^` takes integer powers,
//! and `/` is only allowed between integer literals (exact rationals).

use num::bigint::BigInt;
use num::rational::BigRational;

use super::{MomentPoly, Polynomial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    X,
    M(u32),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(input: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer {
            src: input.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        while let Some(t) = lx.next_token()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok)>> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'x' => {
                self.pos += 1;
                Tok::X
            }
            b'm' => {
                self.pos += 1;
                let digits = self.read_digits();
                if digits.is_empty() {
                    return Err(Error::Parse {
                        position: start,
                        message: "moment symbol `m` must be followed by an index".into(),
                    });
                }
                let idx: u32 = digits.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: "moment symbol index out of range".into(),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        position: start,
                        message: "moment symbols are 1-based: m1, m2, ...".into(),
                    });
                }
                Tok::M(idx)
            }
            b'0'..=b'9' => {
                let digits = self.read_digits();
                Tok::Int(digits.parse().expect("digits form an integer"))
            }
            other => {
                return Err(Error::Parse {
                    position: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Some((start, tok)))
    }

    fn read_digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    len: usize,
}

pub fn parse_polynomial(input: &str) -> Result<Polynomial> {
    let toks = Lexer::tokenize(input)?;
    let mut p = Parser {
        toks,
        idx: 0,
        len: input.len(),
    };
    let poly = p.expr()?;
    if let Some((pos, _)) = p.peek_at() {
        return Err(Error::Parse {
            position: pos,
            message: "trailing input after polynomial".into(),
        });
    }
    Ok(poly)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn peek_at(&self) -> Option<(usize, &Tok)> {
        self.toks.get(self.idx).map(|(p, t)| (*p, t))
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    // products: explicit `*` or juxtaposition (`2m1x`)
    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Some(Tok::Int(_) | Tok::X | Tok::M(_) | Tok::LParen) => {
                    acc = acc.mul(&self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let pos = self.here();
            match self.bump() {
                Some((_, Tok::Int(n))) => {
                    use num::ToPrimitive;
                    let e = n.to_u32().ok_or(Error::Parse {
                        position: pos,
                        message: "exponent too large".into(),
                    })?;
                    return Ok(base.pow(e));
                }
                _ => {
                    return Err(Error::Parse {
                        position: pos,
                        message: "expected a non-negative integer exponent after `^`".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial> {
        let pos = self.here();
        match self.bump() {
            Some((_, Tok::Int(n))) => {
                // optional `/ int` forming an exact rational literal
                if matches!(self.peek(), Some(Tok::Slash)) {
                    self.bump();
                    let dpos = self.here();
                    match self.bump() {
                        Some((_, Tok::Int(d))) => {
                            if d == BigInt::from(0) {
                                return Err(Error::Parse {
                                    position: dpos,
                                    message: "division by zero in rational literal".into(),
                                });
                            }
                            let r = BigRational::new(n, d);
                            Ok(Polynomial::constant(MomentPoly::from_rational(r)))
                        }
                        _ => Err(Error::Parse {
                            position: dpos,
                            message: "`/` is only allowed between integer literals".into(),
                        }),
                    }
                } else {
                    Ok(Polynomial::constant(MomentPoly::from_rational(
                        BigRational::from_integer(n),
                    )))
                }
            }
            Some((_, Tok::X)) => Ok(Polynomial::x_pow(1)),
            Some((_, Tok::M(i))) => Ok(Polynomial::constant(MomentPoly::symbol(i))),
            Some((_, Tok::LParen)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    other => Err(Error::Parse {
                        position: other.map(|(p, _)| p).unwrap_or(self.len),
                        message: "expected `)`".into(),
                    }),
                }
            }
            _ => Err(Error::Parse {
                position: pos,
                message: "expected a number, `x`, `mN`, or `(`".into(),
            }),
        }
    }
}
