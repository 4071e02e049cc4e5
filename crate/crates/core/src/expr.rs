//! Closed-form expressions in `x` and `y`.
//!
//! Boundary graphs, material moduli and plate data are configured as short
//! formula strings such as `0.05*r0*(x/r0)^2*cos(x/r0)`. The parser builds a
//! small AST that evaluates either on plain `f64` or on [`Jet`]s, the latter
//! giving exact partial derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Number types an [`Expr`] can be evaluated on.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    fn lift(v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn atan(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn lift(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Scalar for Jet {
    fn lift(v: f64) -> Self {
        Jet::constant(v)
    }
    fn exp(self) -> Self {
        Jet::exp(&self)
    }
    fn ln(self) -> Self {
        Jet::ln(&self)
    }
    fn sin(self) -> Self {
        Jet::sin(&self)
    }
    fn cos(self) -> Self {
        Jet::cos(&self)
    }
    fn sinh(self) -> Self {
        Jet::sinh(&self)
    }
    fn cosh(self) -> Self {
        Jet::cosh(&self)
    }
    fn tanh(self) -> Self {
        Jet::tanh(&self)
    }
    fn atan(self) -> Self {
        Jet::atan(&self)
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(&self)
    }
    fn abs(self) -> Self {
        Jet::abs(&self)
    }
    fn powf(self, p: f64) -> Self {
        Jet::powf(&self, p)
    }
    fn powi(self, n: i32) -> Self {
        Jet::powi(&self, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Sqrt,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Atan => v.atan(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval<T: Scalar>(&self, x: T, y: T) -> T {
        match self {
            Node::Num(v) => T::lift(*v),
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Pow(a, b) => {
                let base = a.eval(x, y);
                match b.as_constant() {
                    Some(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32),
                    Some(p) => base.powf(p),
                    // Variable exponent: a^b = exp(b ln a).
                    None => (b.eval(x, y) * base.ln()).exp(),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    fn as_constant(&self) -> Option<f64> {
        match self {
            Node::Num(v) => Some(*v),
            Node::Neg(a) => a.as_constant().map(|v| -v),
            Node::X | Node::Y => None,
            Node::Add(a, b) => Some(a.as_constant()? + b.as_constant()?),
            Node::Sub(a, b) => Some(a.as_constant()? - b.as_constant()?),
            Node::Mul(a, b) => Some(a.as_constant()? * b.as_constant()?),
            Node::Div(a, b) => Some(a.as_constant()? / b.as_constant()?),
            Node::Pow(a, b) => Some(a.as_constant()?.powf(b.as_constant()?)),
            Node::Call(f, a) => Some(f.apply(a.as_constant()?)),
        }
    }

    fn uses_y(&self) -> bool {
        match self {
            Node::Y => true,
            Node::Num(_) | Node::X => false,
            Node::Neg(a) | Node::Call(_, a) => a.uses_y(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => a.uses_y() || b.uses_y(),
        }
    }
}

/// A parsed expression in the variables `x` (alias `x1`) and `y` (alias `x2`).
#[derive(Clone, Debug)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parse with the built-in constants `pi` and `e` only.
    pub fn parse(source: &str) -> Result<Expr> {
        Self::parse_with(source, &BTreeMap::new())
    }

    /// Parse, substituting the given named constants (e.g. `r0`).
    pub fn parse_with(source: &str, constants: &BTreeMap<String, f64>) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, constants, source };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }

    pub fn eval_generic<T: Scalar>(&self, x: T, y: T) -> T {
        self.root.eval(x, y)
    }

    /// Full Taylor jet at `(x, y)`.
    pub fn jet(&self, x: f64, y: f64) -> Jet {
        self.root.eval(Jet::var_x(x), Jet::var_y(y))
    }

    /// Derivatives `d^k/dx^k`, k = 0..=6, of a univariate expression in `x`.
    pub fn derivs_1d(&self, x: f64) -> [f64; 7] {
        self.root.eval(Jet::var_x(x), Jet::constant(0.0)).x_derivs()
    }

    pub fn depends_on_y(&self) -> bool {
        self.root.uses_y()
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.root.as_constant()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
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
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{text}' in '{src}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    constants: &'a BTreeMap<String, f64>,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at token {} in '{}'", self.pos, self.source))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // Unary minus binds looser than `^`: -x^2 == -(x^2).
    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let f = Func::lookup(&name).ok_or_else(|| Error::Parse(format!("unknown function '{name}' in '{}'", self.source)))?;
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected ')' after function argument"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "x" | "x1" => Ok(Node::X),
                    "y" | "x2" => Ok(Node::Y),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    other => self
                        .constants
                        .get(other)
                        .map(|v| Node::Num(*v))
                        .ok_or_else(|| Error::Parse(format!("unknown identifier '{other}' in '{}'", self.source))),
                }
            }
            _ => Err(self.error("expected a value")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("-x^2 + 2*3^2^0.5").unwrap();
        let expected = -4.0 + 2.0 * 3f64.powf(2f64.powf(0.5));
        assert_relative_eq!(e.eval(2.0, 0.0), expected, max_relative = 1e-15);
        let e = Expr::parse("8/4/2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn named_constants_and_functions() {
        let mut c = BTreeMap::new();
        c.insert("r0".to_string(), 2.0);
        let e = Expr::parse_with("0.05*r0*(x1/r0)^2*cos(x/r0) + 1e-3*y", &c).unwrap();
        let v = e.eval(1.0, 4.0);
        assert_relative_eq!(v, 0.05 * 2.0 * 0.25 * 0.5f64.cos() + 4e-3, max_relative = 1e-15);
        assert!(e.depends_on_y());
    }

    #[test]
    fn jet_derivatives_of_expression() {
        let e = Expr::parse("y*exp(x)*sin(y)").unwrap();
        let j = e.jet(0.3, 0.7);
        // ∂y (y sin y) e^x = (sin y + y cos y) e^x
        assert_relative_eq!(j.deriv(0, 1), (0.7f64.sin() + 0.7 * 0.7f64.cos()) * 0.3f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(j.deriv(3, 0), 0.7 * 0.7f64.sin() * 0.3f64.exp(), max_relative = 1e-13);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x +* 2").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("q").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x $ 2").is_err());
    }
}
