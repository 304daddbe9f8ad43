//! Small closed-form expressions in the base coordinates `x1..xn`.
//!
//! Used for explicit volume densities, conformal exponents, volume-change
//! functions and one-forms. Expressions evaluate over jets so every
//! derivative the curvature pipeline asks for is exact.

use std::fmt;

use crate::error::{GeomError, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(GeomError::Expr(format!(
                "unexpected trailing input in {src:?}"
            )));
        }
        Ok(e)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    /// Errors unless every referenced coordinate exists in dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.max_var() {
            Some(i) if i >= dim => Err(GeomError::Expr(format!(
                "x{} referenced in dimension {dim}",
                i + 1
            ))),
            _ => Ok(()),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            _ => None,
        }
    }

    /// Evaluates with `x[i]` the jet of coordinate `x^{i+1}`.
    pub fn eval_jet(&self, x: &[Jet]) -> Result<Jet> {
        let proto = x
            .first()
            .ok_or_else(|| GeomError::Expr("no coordinates supplied".into()))?;
        self.eval_with(x, proto)
    }

    fn eval_with(&self, x: &[Jet], proto: &Jet) -> Result<Jet> {
        Ok(match self {
            Expr::Num(v) => proto.space().constant(*v, proto.degree()),
            Expr::Var(i) => x
                .get(*i)
                .cloned()
                .ok_or_else(|| GeomError::Expr(format!("x{} out of range", i + 1)))?,
            Expr::Neg(a) => -a.eval_with(x, proto)?,
            Expr::Add(a, b) => a.eval_with(x, proto)? + b.eval_with(x, proto)?,
            Expr::Sub(a, b) => a.eval_with(x, proto)? - b.eval_with(x, proto)?,
            Expr::Mul(a, b) => a.eval_with(x, proto)? * b.eval_with(x, proto)?,
            Expr::Div(a, b) => a.eval_with(x, proto)?.checked_div(&b.eval_with(x, proto)?)?,
            Expr::Pow(a, b) => {
                let base = a.eval_with(x, proto)?;
                match b.constant_value() {
                    Some(k) if k.fract() == 0.0 && k.abs() <= 64.0 => base.powi(k as i32)?,
                    Some(r) => base.powf(r)?,
                    None => (base.ln()? * b.eval_with(x, proto)?).exp(),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval_with(x, proto)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln()?,
                    Func::Sqrt => v.sqrt()?,
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| GeomError::Expr(format!("x{} out of range", i + 1)))?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)? / b.eval(x)?,
            Expr::Pow(a, b) => a.eval(x)?.powf(b.eval(x)?),
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Pow(a, b) => write!(f, "{a}^{b}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent suffix, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| GeomError::Expr(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(GeomError::Expr(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(GeomError::Expr("missing ')'".into()));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "ln" | "log" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat_op('(') {
                        return Err(GeomError::Expr(format!("{name} needs '('")));
                    }
                    let arg = self.expr()?;
                    if !self.eat_op(')') {
                        return Err(GeomError::Expr("missing ')'".into()));
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx >= 1 {
                        return Ok(Expr::Var(idx - 1));
                    }
                }
                Err(GeomError::Expr(format!("unknown identifier {name:?}")))
            }
            other => Err(GeomError::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("0.1*x1*x2 + exp(x1)^2 - 3/x2").unwrap();
        let v = e.eval(&[0.5, 2.0]).unwrap();
        let want = 0.1 * 0.5 * 2.0 + (0.5f64).exp().powi(2) - 1.5;
        assert!((v - want).abs() < 1e-14);
        assert_eq!(e.max_var(), Some(1));
        assert!(e.check_dim(1).is_err());
        assert!(Expr::parse("-x1^2").unwrap().eval(&[3.0]).unwrap() == -9.0);
        assert!(Expr::parse("1e-3*x1").unwrap().eval(&[2.0]).unwrap() == 2e-3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("foo(x1)").is_err());
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
        assert!(Expr::parse("x1 $").is_err());
    }

    #[test]
    fn jet_evaluation_matches_scalar() {
        let s = JetSpace::new(2).unwrap();
        let x = [s.seed(0, 0.3, 3).unwrap(), s.seed(1, -0.7, 3).unwrap()];
        let e = Expr::parse("sin(x1)*sqrt(2+x2) + x1^1.5").unwrap();
        let j = e.eval_jet(&x).unwrap();
        assert!((j.value() - e.eval(&[0.3, -0.7]).unwrap()).abs() < 1e-14);
        // d/dx1 = cos(x1) sqrt(2+x2) + 1.5 x1^0.5
        let d = j.deriv(0).unwrap().value();
        let want = 0.3f64.cos() * 1.3f64.sqrt() + 1.5 * 0.3f64.sqrt();
        assert!((d - want).abs() < 1e-13);
    }
}
