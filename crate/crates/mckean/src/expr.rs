//! A small arithmetic-expression language for model coefficients loaded from
//! configuration: operators `+ - * /`, functions `tanh`, `exp`, `min`, and
//! the variables `t`, `x`, `a1`, `a2`, `m1..mD`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::measure::MomentVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    /// `a1`, `a2`, ... (0-based slot).
    Control(usize),
    /// `m1`, `m2`, ... (1-based moment order).
    Moment(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X => write!(f, "x"),
            Var::Control(i) => write!(f, "a{}", i + 1),
            Var::Moment(k) => write!(f, "m{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Tanh(Box<Expr>),
    Exp(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
}

/// Values bound to the variables during evaluation. Unbound moments evaluate
/// to NaN, which the downstream finiteness checks surface.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub t: f64,
    pub x: f64,
    pub moments: Option<&'a MomentVector>,
    pub control: &'a [f64],
}

impl Expr {
    pub fn eval(&self, ctx: &EvalContext<'_>) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::T) => ctx.t,
            Expr::Var(Var::X) => ctx.x,
            Expr::Var(Var::Control(i)) => ctx.control.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Var(Var::Moment(k)) => ctx
                .moments
                .and_then(|m| m.moment(*k))
                .unwrap_or(f64::NAN),
            Expr::Neg(e) => -e.eval(ctx),
            Expr::Add(a, b) => a.eval(ctx) + b.eval(ctx),
            Expr::Sub(a, b) => a.eval(ctx) - b.eval(ctx),
            Expr::Mul(a, b) => a.eval(ctx) * b.eval(ctx),
            Expr::Div(a, b) => a.eval(ctx) / b.eval(ctx),
            Expr::Tanh(e) => e.eval(ctx).tanh(),
            Expr::Exp(e) => e.eval(ctx).exp(),
            Expr::Min(a, b) => a.eval(ctx).min(b.eval(ctx)),
        }
    }

    /// All variables the expression reads.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) | Expr::Tanh(e) | Expr::Exp(e) => e.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Min(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

pub fn parse_expr(input: &str) -> Result<Expr> {
    let mut parser = ExprParser {
        src: input.as_bytes(),
        pos: 0,
    };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(Error::Parse {
            position: parser.pos,
            message: "trailing input after expression".into(),
        });
    }
    Ok(expr)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let c = self.peek().ok_or(Error::Parse {
            position: self.pos,
            message: "unexpected end of expression".into(),
        })?;
        match c {
            b'(' => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            b'0'..=b'9' | b'.' => self.number(),
            c if c.is_ascii_alphabetic() => self.ident(),
            other => Err(Error::Parse {
                position: self.pos,
                message: format!("unexpected character `{}`", other as char),
            }),
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                position: self.pos,
                message: format!("expected `{}`", c as char),
            })
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || ((self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
                    && self.pos + 1 < self.src.len()
                    && (self.src[self.pos + 1].is_ascii_digit()
                        || self.src[self.pos + 1] == b'+'
                        || self.src[self.pos + 1] == b'-'))
                || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    && self.pos > start
                    && (self.src[self.pos - 1] == b'e' || self.src[self.pos - 1] == b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Parse {
                position: start,
                message: format!("bad number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "t" => Ok(Expr::Var(Var::T)),
            "x" => Ok(Expr::Var(Var::X)),
            "tanh" | "exp" => {
                self.expect(b'(')?;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(if name == "tanh" {
                    Expr::Tanh(Box::new(inner))
                } else {
                    Expr::Exp(Box::new(inner))
                })
            }
            "min" => {
                self.expect(b'(')?;
                let a = self.expr()?;
                self.expect(b',')?;
                let b = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Min(Box::new(a), Box::new(b)))
            }
            _ if name.starts_with('a') && name[1..].chars().all(|c| c.is_ascii_digit()) && name.len() > 1 => {
                let slot: usize = name[1..].parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("bad control variable `{name}`"),
                })?;
                if slot == 0 {
                    return Err(Error::Parse {
                        position: start,
                        message: "control variables start at a1".into(),
                    });
                }
                Ok(Expr::Var(Var::Control(slot - 1)))
            }
            _ if name.starts_with('m') && name[1..].chars().all(|c| c.is_ascii_digit()) && name.len() > 1 => {
                let order: usize = name[1..].parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("bad moment variable `{name}`"),
                })?;
                if order == 0 {
                    return Err(Error::Parse {
                        position: start,
                        message: "moment variables start at m1".into(),
                    });
                }
                Ok(Expr::Var(Var::Moment(order)))
            }
            other => Err(Error::Parse {
                position: start,
                message: format!("unknown identifier `{other}`"),
            }),
        }
    }
}
