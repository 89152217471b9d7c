//! Scalar expressions in `n`, `x` and `ξ`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'i' | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus on its left and accepts a signed exponent on its right,
//! so `-n^2` is `-(n^2)` and `(1+n^2)^-0.5` parses without extra parentheses.

use num_complex::Complex64;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    N,
    X,
    Xi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Imag,
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{message} at line {line}, column {column}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let chars: Vec<(usize, char)> = src.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, ch) = chars[i];
            if ch.is_whitespace() {
                i += 1;
            } else if ch.is_ascii_digit() || ch == '.' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let end = if i < chars.len() { chars[i].0 } else { src.len() };
                let text = &src[chars[start].0..end];
                let v: f64 = text.parse().map_err(|_| lx.error(pos, format!("malformed number `{text}`")))?;
                lx.toks.push((Tok::Num(v), pos));
            } else if ch.is_alphabetic() || ch == '_' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let end = if i < chars.len() { chars[i].0 } else { src.len() };
                lx.toks.push((Tok::Ident(src[chars[start].0..end].to_string()), pos));
            } else if "+-*/^()".contains(ch) {
                lx.toks.push((Tok::Sym(ch), pos));
                i += 1;
            } else {
                return Err(lx.error(pos, format!("unexpected character `{ch}`")));
            }
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    fn error(&self, pos: usize, message: String) -> ParseError {
        position_error(self.src, pos, message)
    }
}

fn position_error(src: &str, pos: usize, message: String) -> ParseError {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseError { message, line, column }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(position_error(self.src, self.pos(), message.into()))
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sqrt" => Some(Func::Sqrt),
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(f) = func {
                    self.bump();
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                let e = match name.as_str() {
                    "i" => Expr::Imag,
                    "pi" => Expr::Pi,
                    "n" => Expr::Var(Var::N),
                    "x" => Expr::Var(Var::X),
                    "xi" | "ξ" => Expr::Var(Var::Xi),
                    _ => return self.error(format!("unknown identifier `{name}`")),
                };
                self.bump();
                Ok(e)
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Sym(c) => self.error(format!("unexpected `{c}`")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { src, toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}

/// Values of the free variables.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub n: f64,
    pub x: f64,
    pub xi: f64,
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `a^b` with integer real exponents taken exactly, otherwise on the principal branch.
fn power(a: Complex64, b: Complex64) -> Complex64 {
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() < 64.0 {
        a.powi(b.re as i32)
    } else if a == c(0.0) {
        if b.re > 0.0 {
            c(0.0)
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    } else {
        (b * a.ln()).exp()
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Complex64 {
        match self {
            Expr::Num(v) => c(*v),
            Expr::Imag => Complex64::new(0.0, 1.0),
            Expr::Pi => c(std::f64::consts::PI),
            Expr::Var(Var::N) => c(env.n),
            Expr::Var(Var::X) => c(env.x),
            Expr::Var(Var::Xi) => c(env.xi),
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => power(a, b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(env);
                match f {
                    Func::Sqrt => a.sqrt(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
        }
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(v),
            Expr::Bin(_, a, b) => a.uses(v) || b.uses(v),
            _ => false,
        }
    }

    pub fn is_constant(&self) -> bool {
        !(self.uses(Var::N) || self.uses(Var::X) || self.uses(Var::Xi))
    }

    /// Coefficients `c_k` of `Σ c_k v^k` when the expression is a polynomial in `v` alone.
    pub fn polynomial(&self, v: Var) -> Option<Vec<Complex64>> {
        let others = [Var::N, Var::X, Var::Xi].into_iter().filter(|w| *w != v);
        for w in others {
            if self.uses(w) {
                return None;
            }
        }
        self.poly(v).map(|mut p| {
            while p.len() > 1 && p.last() == Some(&c(0.0)) {
                p.pop();
            }
            p
        })
    }

    fn poly(&self, v: Var) -> Option<Vec<Complex64>> {
        if self.is_constant() {
            return Some(vec![self.eval(&Env::default())]);
        }
        match self {
            Expr::Var(w) if *w == v => Some(vec![c(0.0), c(1.0)]),
            Expr::Neg(e) => Some(e.poly(v)?.into_iter().map(|a| -a).collect()),
            Expr::Bin(op, a, b) => match op {
                BinOp::Add | BinOp::Sub => {
                    let (p, q) = (a.poly(v)?, b.poly(v)?);
                    let s = if *op == BinOp::Add { 1.0 } else { -1.0 };
                    let mut out = vec![c(0.0); p.len().max(q.len())];
                    for (k, x) in p.iter().enumerate() {
                        out[k] += x;
                    }
                    for (k, x) in q.iter().enumerate() {
                        out[k] += x * s;
                    }
                    Some(out)
                }
                BinOp::Mul => Some(mul(&a.poly(v)?, &b.poly(v)?)),
                BinOp::Div if b.is_constant() => {
                    let d = b.eval(&Env::default());
                    Some(a.poly(v)?.into_iter().map(|x| x / d).collect())
                }
                BinOp::Pow if b.is_constant() => {
                    let e = b.eval(&Env::default());
                    if e.im != 0.0 || e.re < 0.0 || e.re.fract() != 0.0 || e.re > 16.0 {
                        return None;
                    }
                    let base = a.poly(v)?;
                    let mut acc = vec![c(1.0)];
                    for _ in 0..e.re as usize {
                        acc = mul(&acc, &base);
                    }
                    Some(acc)
                }
                _ => None,
            },
            _ => None,
        }
    }
}

fn mul(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![c(0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Emits text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Imag => write!(f, "i"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(Var::N) => write!(f, "n"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Xi) => write!(f, "xi"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, prec(e) < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = prec(self);
                let (sym, lpar, rpar) = match op {
                    BinOp::Add => ("+", prec(a) < 1, prec(b) <= 1),
                    BinOp::Sub => ("-", prec(a) < 1, prec(b) <= 1),
                    BinOp::Mul => ("*", prec(a) < 2, prec(b) <= 2),
                    BinOp::Div => ("/", prec(a) < 2, prec(b) <= 2),
                    BinOp::Pow => ("^", prec(a) <= p, prec(b) < 3),
                };
                wrap(f, a, lpar)?;
                write!(f, "{sym}")?;
                wrap(f, b, rpar)
            }
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sqrt => "sqrt",
                    Func::Exp => "exp",
                    Func::Log => "log",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}
