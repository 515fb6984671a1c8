//! A small closed-form expression language for nilsequence output functions:
//! sums and products of e(·), coordinate polynomials and tent bumps, with a
//! machine-checkable sup-bound. Serialized experiments only accept these
//! expressions, never arbitrary callbacks.

use num::complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {reason}")]
    Parse { pos: usize, reason: String },
    #[error("e(...) and tent(...) need a real-valued argument")]
    ComplexArgument,
    #[error("coordinate t{0} out of range (point has {1} coordinates)")]
    CoordOutOfRange(usize, usize),
}

/// Expression tree. `Coord(i)` refers to the i-th Mal'cev coordinate in [0,1).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// e(x) = exp(2πi·x).
    E(Box<Expr>),
    /// Periodic tent bump: 1 − 2·dist(x, Z), peak 1 at integers, Lipschitz 2.
    Tent(Box<Expr>),
}

fn torus_dist(t: f64) -> f64 {
    let f = t.rem_euclid(1.0);
    f.min(1.0 - f)
}

impl Expr {
    /// All subexpressions inside e(·)/tent(·) must be real.
    pub fn is_real(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Coord(_) | Expr::Tent(_) => true,
            Expr::Neg(a) => a.is_real(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_real() && b.is_real(),
            Expr::E(_) => false,
        }
    }

    pub fn validate(&self, coord_count: usize) -> Result<(), ExprError> {
        match self {
            Expr::Num(_) => Ok(()),
            Expr::Coord(i) => {
                if *i < coord_count {
                    Ok(())
                } else {
                    Err(ExprError::CoordOutOfRange(*i, coord_count))
                }
            }
            Expr::Neg(a) => a.validate(coord_count),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.validate(coord_count)?;
                b.validate(coord_count)
            }
            Expr::E(a) | Expr::Tent(a) => {
                if !a.is_real() {
                    return Err(ExprError::ComplexArgument);
                }
                a.validate(coord_count)
            }
        }
    }

    pub fn eval(&self, coords: &[f64]) -> Complex64 {
        match self {
            Expr::Num(c) => Complex64::new(*c, 0.0),
            Expr::Coord(i) => Complex64::new(coords[*i], 0.0),
            Expr::Neg(a) => -a.eval(coords),
            Expr::Add(a, b) => a.eval(coords) + b.eval(coords),
            Expr::Sub(a, b) => a.eval(coords) - b.eval(coords),
            Expr::Mul(a, b) => a.eval(coords) * b.eval(coords),
            Expr::E(a) => {
                let t = a.eval(coords).re;
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
            }
            Expr::Tent(a) => {
                let t = a.eval(coords).re;
                Complex64::new(1.0 - 2.0 * torus_dist(t), 0.0)
            }
        }
    }

    /// A certified upper bound for |expr| on [0,1)^m coordinates.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Expr::Num(c) => c.abs(),
            Expr::Coord(_) => 1.0,
            Expr::Neg(a) => a.sup_bound(),
            Expr::Add(a, b) | Expr::Sub(a, b) => a.sup_bound() + b.sup_bound(),
            Expr::Mul(a, b) => a.sup_bound() * b.sup_bound(),
            Expr::E(_) | Expr::Tent(_) => 1.0,
        }
    }

    pub fn parse(input: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src: input.as_bytes(),
            pos: 0,
        };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ExprError::Parse {
                pos: p.pos,
                reason: "trailing input".into(),
            });
        }
        Ok(expr)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError::Parse {
                pos: self.pos,
                reason: format!("expected `{}`", c as char),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
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

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b't') => {
                // Either `tent(...)` or a coordinate `t{i}`.
                if self.src[self.pos..].starts_with(b"tent") {
                    self.pos += 4;
                    self.expect(b'(')?;
                    let inner = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::Tent(Box::new(inner)));
                }
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(ExprError::Parse {
                        pos: self.pos,
                        reason: "expected coordinate index after `t`".into(),
                    });
                }
                let idx: usize = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| ExprError::Parse {
                        pos: start,
                        reason: "bad coordinate index".into(),
                    })?;
                Ok(Expr::Coord(idx))
            }
            Some(b'e') => {
                self.pos += 1;
                self.expect(b'(')?;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::E(Box::new(inner)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            _ => Err(ExprError::Parse {
                pos: self.pos,
                reason: "expected expression".into(),
            }),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        let lit: f64 = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ExprError::Parse {
                pos: start,
                reason: "bad number".into(),
            })?;
        // Rational literal `p/q`.
        if self.src.get(self.pos) == Some(&b'/') {
            self.pos += 1;
            let dstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let den: f64 = std::str::from_utf8(&self.src[dstart..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| ExprError::Parse {
                    pos: dstart,
                    reason: "bad denominator".into(),
                })?;
            if den == 0.0 {
                return Err(ExprError::Parse {
                    pos: dstart,
                    reason: "zero denominator".into(),
                });
            }
            return Ok(Expr::Num(lit / den));
        }
        Ok(Expr::Num(lit))
    }
}

/// Spot-verifies a declared Lipschitz constant by sampled difference
/// quotients; the metric on coordinates is the sum of torus distances.
pub fn spot_check_lipschitz(
    expr: &Expr,
    coord_count: usize,
    declared: f64,
    samples: u32,
    seed: u64,
) -> bool {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let a: Vec<f64> = (0..coord_count).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..coord_count).map(|_| rng.random::<f64>()).collect();
        let dist: f64 = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| torus_dist(x - y))
            .sum();
        let gap = (expr.eval(&a) - expr.eval(&b)).norm();
        if gap > declared * dist + 1e-9 {
            return false;
        }
    }
    true
}
