//! Small closed-form expression language.
//!
//! Used for Hamiltonians on phase space (variables `q1..qn`, `p1..pn`, with
//! `q`/`p` accepted as shorthand when n = 1) and for outer maps of integral
//! functionals (variables `y1..ym`, shorthand `y`). The grammar is
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' integer)?
//! atom   := number | 'pi' | variable | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Expressions carry resolved variable indices, so evaluation in inner loops
//! is allocation-free. Differentiation is symbolic; gradients and Hessians of
//! parsed Hamiltonians are therefore exact, not finite-differenced.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, k) => a.eval(vars).powi(*k),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Sin(a) => a.eval(vars).sin(),
            Expr::Cos(a) => a.eval(vars).cos(),
        }
    }

    /// Symbolic partial derivative with respect to variable index `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let d = match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::Add(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Expr::Mul(a, b) => Expr::Add(
                Box::new(Expr::Mul(Box::new(a.diff(var)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(b.diff(var)))),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(Expr::Sub(
                    Box::new(Expr::Mul(Box::new(a.diff(var)), b.clone())),
                    Box::new(Expr::Mul(a.clone(), Box::new(b.diff(var)))),
                )),
                Box::new(Expr::Pow(b.clone(), 2)),
            ),
            Expr::Pow(a, k) => Expr::Mul(
                Box::new(Expr::Mul(
                    Box::new(Expr::Const(f64::from(*k))),
                    Box::new(Expr::Pow(a.clone(), k - 1)),
                )),
                Box::new(a.diff(var)),
            ),
            Expr::Neg(a) => Expr::Neg(Box::new(a.diff(var))),
            Expr::Sin(a) => Expr::Mul(Box::new(Expr::Cos(a.clone())), Box::new(a.diff(var))),
            Expr::Cos(a) => Expr::Neg(Box::new(Expr::Mul(
                Box::new(Expr::Sin(a.clone())),
                Box::new(a.diff(var)),
            ))),
        };
        d.simplify()
    }

    /// Constant folding plus unit/zero elimination. Keeps derivative trees
    /// small enough that Hessians of the polynomial dictionary stay cheap.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Add(a, b) => match (a.simplify(), b.simplify()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
                (Expr::Const(0.0), e) => e,
                (e, Expr::Const(0.0)) => e,
                (x, y) => Expr::Add(Box::new(x), Box::new(y)),
            },
            Expr::Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
                (e, Expr::Const(0.0)) => e,
                (Expr::Const(0.0), e) => Expr::Neg(Box::new(e)).simplify(),
                (x, y) => Expr::Sub(Box::new(x), Box::new(y)),
            },
            Expr::Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
                (Expr::Const(0.0), _) | (_, Expr::Const(0.0)) => Expr::Const(0.0),
                (Expr::Const(1.0), e) => e,
                (e, Expr::Const(1.0)) => e,
                (x, y) => Expr::Mul(Box::new(x), Box::new(y)),
            },
            Expr::Div(a, b) => match (a.simplify(), b.simplify()) {
                (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
                (e, Expr::Const(1.0)) => e,
                (Expr::Const(0.0), _) => Expr::Const(0.0),
                (x, y) => Expr::Div(Box::new(x), Box::new(y)),
            },
            Expr::Pow(a, k) => match (a.simplify(), *k) {
                (_, 0) => Expr::Const(1.0),
                (e, 1) => e,
                (Expr::Const(x), k) => Expr::Const(x.powi(k)),
                (e, k) => Expr::Pow(Box::new(e), k),
            },
            Expr::Neg(a) => match a.simplify() {
                Expr::Const(x) => Expr::Const(-x),
                Expr::Neg(inner) => *inner,
                e => Expr::Neg(Box::new(e)),
            },
            Expr::Sin(a) => match a.simplify() {
                Expr::Const(x) => Expr::Const(x.sin()),
                e => Expr::Sin(Box::new(e)),
            },
            Expr::Cos(a) => match a.simplify() {
                Expr::Const(x) => Expr::Const(x.cos()),
                e => Expr::Cos(Box::new(e)),
            },
        }
    }

    pub fn gradient(&self, dim: usize) -> Vec<Expr> {
        (0..dim).map(|i| self.diff(i)).collect()
    }

    pub fn hessian(&self, dim: usize) -> Vec<Vec<Expr>> {
        let grad = self.gradient(dim);
        grad.iter()
            .map(|gi| (0..dim).map(|j| gi.diff(j)).collect())
            .collect()
    }

    /// Same expression over a widened variable list, every index moved up
    /// by `offset`.
    pub fn shift_vars(&self, offset: usize) -> Expr {
        let s = |e: &Expr| Box::new(e.shift_vars(offset));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => Expr::Var(i + offset),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, k) => Expr::Pow(s(a), *k),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Sin(a) => Expr::Sin(s(a)),
            Expr::Cos(a) => Expr::Cos(s(a)),
        }
    }
}

/// Resolves identifier names to variable indices for one naming scheme.
pub trait VarResolver {
    fn resolve(&self, name: &str) -> Option<usize>;
    fn dim(&self) -> usize;
}

/// Phase-space scheme on R^{2n}: `q1..qn` map to 0..n, `p1..pn` to n..2n.
/// `q` and `p` alone are accepted only when n = 1.
pub struct PhaseVars {
    pub half_dim: usize,
}

impl VarResolver for PhaseVars {
    fn resolve(&self, name: &str) -> Option<usize> {
        let n = self.half_dim;
        let (family, rest) = name.split_at(1);
        let offset = match family {
            "q" => 0,
            "p" => n,
            _ => return None,
        };
        if rest.is_empty() {
            return if n == 1 { Some(offset) } else { None };
        }
        let k: usize = rest.parse().ok()?;
        if k >= 1 && k <= n {
            Some(offset + k - 1)
        } else {
            None
        }
    }

    fn dim(&self) -> usize {
        2 * self.half_dim
    }
}

/// Outer-map scheme: `y1..ym` map to 0..m, with `y` accepted when m = 1.
pub struct OuterVars {
    pub arity: usize,
}

impl VarResolver for OuterVars {
    fn resolve(&self, name: &str) -> Option<usize> {
        let rest = name.strip_prefix('y')?;
        if rest.is_empty() {
            return if self.arity == 1 { Some(0) } else { None };
        }
        let k: usize = rest.parse().ok()?;
        if k >= 1 && k <= self.arity {
            Some(k - 1)
        } else {
            None
        }
    }

    fn dim(&self) -> usize {
        self.arity
    }
}

pub fn parse(src: &str, vars: &dyn VarResolver) -> Result<Expr> {
    let mut p = Parser {
        chars: src.char_indices().peekable(),
        src,
        vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if let Some(&(pos, c)) = p.chars.peek() {
        return Err(Error::Parse {
            pos,
            message: format!("unexpected '{c}'"),
        });
    }
    Ok(e.simplify())
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    vars: &'a dyn VarResolver,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().map(|&(_, c)| c)
    }

    fn pos(&mut self) -> usize {
        self.skip_ws();
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }

    fn expect(&mut self, want: char) -> Result<()> {
        let pos = self.pos();
        match self.chars.peek() {
            Some(&(_, c)) if c == want => {
                self.chars.next();
                Ok(())
            }
            _ => Err(Error::Parse {
                pos,
                message: format!("expected '{want}'"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.chars.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') => {
                    self.chars.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.chars.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.chars.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some('-') {
            self.chars.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.chars.next();
            let pos = self.pos();
            let neg = if self.peek() == Some('-') {
                self.chars.next();
                true
            } else {
                false
            };
            let mut digits = String::new();
            while matches!(self.chars.peek(), Some((_, c)) if c.is_ascii_digit()) {
                digits.push(self.chars.next().unwrap().1);
            }
            let k: i32 = digits.parse().map_err(|_| Error::Parse {
                pos,
                message: "expected integer exponent".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), if neg { -k } else { k }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek() {
            Some('(') => {
                self.chars.next();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(pos),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let name = self.ident();
                match name.as_str() {
                    "sin" | "cos" => {
                        self.expect('(')?;
                        let inner = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(if name == "sin" {
                            Expr::Sin(inner)
                        } else {
                            Expr::Cos(inner)
                        })
                    }
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    _ => match self.vars.resolve(&name) {
                        Some(i) => Ok(Expr::Var(i)),
                        None => Err(Error::Parse {
                            pos,
                            message: format!("unknown variable '{name}'"),
                        }),
                    },
                }
            }
            Some(c) => Err(Error::Parse {
                pos,
                message: format!("unexpected '{c}'"),
            }),
            None => Err(Error::Parse {
                pos,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while matches!(self.chars.peek(), Some((_, c)) if c.is_ascii_alphanumeric() || *c == '_') {
            s.push(self.chars.next().unwrap().1);
        }
        s
    }

    fn number(&mut self, pos: usize) -> Result<Expr> {
        let mut s = String::new();
        let mut seen_e = false;
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_digit() || c == '.' {
                s.push(c);
                self.chars.next();
            } else if (c == 'e' || c == 'E') && !seen_e {
                seen_e = true;
                s.push(c);
                self.chars.next();
                if let Some(&(_, sign)) = self.chars.peek() {
                    if sign == '+' || sign == '-' {
                        s.push(sign);
                        self.chars.next();
                    }
                }
            } else {
                break;
            }
        }
        s.parse::<f64>().map(Expr::Const).map_err(|_| Error::Parse {
            pos,
            message: format!("bad number literal '{s}'"),
        })
    }
}
