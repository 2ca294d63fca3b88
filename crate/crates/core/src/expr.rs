//! Closed-form scalar expressions in variables `x0, x1, ...` with exact symbolic
//! derivatives.
//!
//! Expressions are either parsed from text (`"x0 + 0.1*sin(x0)"`) or given as a
//! JSON tree (`{"add":[{"var":0},{"const":1.0}]}`); [`ExprSpec`] accepts both.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
}

use Expr::*;

fn c(v: f64) -> Expr {
    Const(v)
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Var(i)
    }

    pub fn constant(v: f64) -> Self {
        Const(v)
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Const(v) => Some(*v),
            _ => None,
        }
    }

    // Smart constructors fold constants and drop neutral elements so that
    // repeated differentiation does not blow up with `0 * ...` terms.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => c(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => c(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Sub(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => c(x * y),
            (Some(x), _) if x == 0.0 => c(0.0),
            (_, Some(y)) if y == 0.0 => c(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => c(x / y),
            (Some(x), _) if x == 0.0 => c(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Div(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Const(x) => c(-x),
            Neg(inner) => (*inner).clone(),
            other => Neg(Arc::new(other)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (a.as_const(), n) {
            (_, 0) => c(1.0),
            (_, 1) => a,
            (Some(x), _) => c(x.powi(n)),
            _ => Pow(Arc::new(a), n),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(x) => c(x.sin()),
            None => Sin(Arc::new(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(x) => c(x.cos()),
            None => Cos(Arc::new(a)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(x) => c(x.exp()),
            None => Exp(Arc::new(a)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Const(v) => *v,
            Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Neg(a) => -a.eval(x),
            Pow(a, n) => a.eval(x).powi(*n),
            Sin(a) => a.eval(x).sin(),
            Cos(a) => a.eval(x).cos(),
            Exp(a) => a.eval(x).exp(),
        }
    }

    /// `∂/∂x_var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Const(_) => c(0.0),
            Var(i) => c(if *i == var { 1.0 } else { 0.0 }),
            Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(var)),
                ),
                Expr::pow((**b).clone(), 2),
            ),
            Neg(a) => Expr::neg(a.diff(var)),
            Pow(a, n) => Expr::mul(
                Expr::mul(c(*n as f64), Expr::pow((**a).clone(), n - 1)),
                a.diff(var),
            ),
            Sin(a) => Expr::mul(Expr::cos((**a).clone()), a.diff(var)),
            Cos(a) => Expr::neg(Expr::mul(Expr::sin((**a).clone()), a.diff(var))),
            Exp(a) => Expr::mul(Expr::exp((**a).clone()), a.diff(var)),
        }
    }

    /// Replaces every `x_i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Const(v) => c(*v),
            Var(i) => subs.get(*i).cloned().unwrap_or(Var(*i)),
            Add(a, b) => Expr::add(a.substitute(subs), b.substitute(subs)),
            Sub(a, b) => Expr::sub(a.substitute(subs), b.substitute(subs)),
            Mul(a, b) => Expr::mul(a.substitute(subs), b.substitute(subs)),
            Div(a, b) => Expr::div(a.substitute(subs), b.substitute(subs)),
            Neg(a) => Expr::neg(a.substitute(subs)),
            Pow(a, n) => Expr::pow(a.substitute(subs), *n),
            Sin(a) => Expr::sin(a.substitute(subs)),
            Cos(a) => Expr::cos(a.substitute(subs)),
            Exp(a) => Expr::exp(a.substitute(subs)),
        }
    }

    /// One more than the largest variable index used.
    pub fn arity(&self) -> usize {
        match self {
            Const(_) => 0,
            Var(i) => i + 1,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.arity().max(b.arity()),
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) => a.arity(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(v) => write!(f, "{v}"),
            Var(i) => write!(f, "x{i}"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Neg(a) => write!(f, "(-{a})"),
            Pow(a, n) => write!(f, "{a}^{n}"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Func(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Token)>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let start = i;
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || ((chars[i] == 'e' || chars[i] == 'E')
                        && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '-' || *n == '+'))
                    || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| LipError::Parse(format!("bad number '{text}' at column {}", start + 1)))?;
            out.push((start, Token::Num(v)));
        } else if ch.is_ascii_alphabetic() {
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "sin" | "cos" | "exp" => Token::Func(word),
                "pi" => Token::Num(std::f64::consts::PI),
                w => match w.strip_prefix('x').and_then(|n| n.parse().ok()) {
                    Some(n) => Token::Var(n),
                    None => {
                        return Err(LipError::Parse(format!(
                            "unknown identifier '{w}' at column {} (variables are x0, x1, ...)",
                            start + 1
                        )))
                    }
                },
            };
            out.push((start, tok));
        } else {
            let tok = match ch {
                '+' | '-' | '*' | '/' | '^' => Token::Op(ch),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => {
                    return Err(LipError::Parse(format!(
                        "unexpected character '{ch}' at column {}",
                        start + 1
                    )))
                }
            };
            out.push((start, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(usize::MAX, |(c, _)| c + 1)
    }

    fn err(&self, what: &str) -> LipError {
        if self.pos >= self.toks.len() {
            LipError::Parse(format!("{what} at end of expression"))
        } else {
            LipError::Parse(format!("{what} at column {}", self.column()))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::add(lhs, rhs) } else { Expr::sub(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::mul(lhs, rhs) } else { Expr::div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::neg(self.unary()?))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let neg = matches!(self.peek(), Some(Token::Op('-')));
            if neg {
                self.pos += 1;
            }
            match self.peek().cloned() {
                Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() < 64.0 => {
                    self.pos += 1;
                    let n = v as i32;
                    Ok(Expr::pow(base, if neg { -n } else { n }))
                }
                _ => Err(self.err("exponent must be an integer literal")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Const(v))
            }
            Some(Token::Var(i)) => {
                self.pos += 1;
                Ok(Var(i))
            }
            Some(Token::Func(name)) => {
                self.pos += 1;
                if self.peek() != Some(&Token::LParen) {
                    return Err(self.err("expected '(' after function name"));
                }
                let arg = self.atom()?;
                Ok(match name.as_str() {
                    "sin" => Expr::sin(arg),
                    "cos" => Expr::cos(arg),
                    _ => Expr::exp(arg),
                })
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.err("expected a number, variable, function or '('")),
        }
    }
}

impl FromStr for Expr {
    type Err = LipError;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            toks: tokenize(s)?,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

/// An expression given either as text or as a JSON tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSpec {
    Text(String),
    Tree(Expr),
}

impl ExprSpec {
    pub fn to_expr(&self) -> Result<Expr> {
        match self {
            ExprSpec::Text(s) => s.parse(),
            ExprSpec::Tree(e) => Ok(e.clone()),
        }
    }
}

impl From<&Expr> for ExprSpec {
    fn from(e: &Expr) -> Self {
        ExprSpec::Tree(e.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(p("1 + 2*3^2").eval(&[]), 19.0);
        assert_eq!(p("-x0^2").eval(&[3.0]), -9.0);
        assert_eq!(p("(x0 - x1) / 2").eval(&[5.0, 1.0]), 2.0);
        assert_eq!(p("x0^-1").eval(&[4.0]), 0.25);
        assert!((p("1.5e-1 * 2").eval(&[]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_have_columns() {
        let e = "x0 + y".parse::<Expr>().unwrap_err().to_string();
        assert!(e.contains("column 6"), "{e}");
        assert!("x0 +".parse::<Expr>().is_err());
        assert!("x0^0.5".parse::<Expr>().is_err());
        assert!("(x0".parse::<Expr>().is_err());
    }

    #[test]
    fn derivatives() {
        let f = p("x0 + 0.1*sin(x0)");
        let df = f.diff(0);
        assert!((df.eval(&[0.3]) - (1.0 + 0.1 * 0.3f64.cos())).abs() < 1e-15);
        let g = p("x0^3 * x1");
        assert_eq!(g.diff(0).diff(1).eval(&[2.0, 5.0]), 12.0);
        let q = p("1 / (1 + x0^2)");
        assert!((q.diff(0).eval(&[1.0]) + 0.5).abs() < 1e-15);
        assert_eq!(p("exp(2*x0)").diff(0).eval(&[0.0]), 2.0);
    }

    #[test]
    fn substitution() {
        let g = p("x0^2");
        let f = p("x0 + 1");
        assert_eq!(g.substitute(&[f]).diff(0).eval(&[2.0]), 6.0);
    }

    #[test]
    fn spec_forms() {
        let t: ExprSpec = serde_json::from_str(r#""sin(x0)""#).unwrap();
        let tree: ExprSpec = serde_json::from_str(r#"{"sin":{"var":0}}"#).unwrap();
        assert_eq!(t.to_expr().unwrap(), tree.to_expr().unwrap());
        let s = serde_json::to_string(&p("x0 * 2")).unwrap();
        assert_eq!(s, r#"{"mul":[{"var":0},{"const":2.0}]}"#);
    }
}
