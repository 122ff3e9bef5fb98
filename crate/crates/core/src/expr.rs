//! A tiny arithmetic grammar in one variable `x`, used by user-supplied
//! piecewise maps and expression potentials.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func  := log | abs | exp | sqrt | sin | cos
//! ```
//!
//! `log` is the natural logarithm. Expressions are differentiated symbolically
//! so that piecewise maps get exact branch derivatives.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Abs,
    Exp,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "log" => Func::Log,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// sign(u); only produced by differentiating `abs`.
    Sign(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected token {:?} in '{src}'",
                parser.tokens[parser.pos]
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                match **b {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(c as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
            Expr::Sign(a) => {
                let v = a.eval(x);
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn is_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) | Sign(_) => Const(0.0),
            X => Const(1.0),
            Neg(a) => neg(a.derivative()),
            Add(a, b) => add(a.derivative(), b.derivative()),
            Sub(a, b) => sub(a.derivative(), b.derivative()),
            Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                Pow(b.clone(), Box::new(Const(2.0))),
            ),
            Pow(a, b) => {
                if let Some(c) = b.is_const() {
                    // c * a^(c-1) * a'
                    mul(
                        mul(Const(c), Pow(a.clone(), Box::new(Const(c - 1.0)))),
                        a.derivative(),
                    )
                } else {
                    // a^b * (b' log a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.derivative(), Call(Func::Log, a.clone())),
                            div(mul((**b).clone(), a.derivative()), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative();
                let outer = match f {
                    Func::Log => div(Const(1.0), (**a).clone()),
                    Func::Abs => Sign(a.clone()),
                    Func::Exp => self.clone(),
                    Func::Sqrt => div(Const(0.5), self.clone()),
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                };
                mul(outer, inner)
            }
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a.is_const() {
        Some(c) => Expr::Const(-c),
        None => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Sign(a) => write!(f, "sign({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
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
            // exponent part: 1e-3, 2.5E+4
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
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                _ => {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| Error::Parse(format!("unknown identifier '{name}'")))?;
                    if self.next() != Some(Token::LParen) {
                        return Err(Error::Parse(format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if self.next() != Some(Token::RParen) {
                        return Err(Error::Parse(format!("missing ')' after {name}(...")));
                    }
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            },
            Some(Token::LParen) => {
                let e = self.expr()?;
                if self.next() != Some(Token::RParen) {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Some(t) => Err(Error::Parse(format!("unexpected token {t:?}"))),
            None => Err(Error::Parse("unexpected end of expression".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("1e-3 * 2", 0.0), 0.002);
    }

    #[test]
    fn functions() {
        assert!((ev("log(x)", std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert_eq!(ev("abs(x - 1)", 0.25), 0.75);
        assert!((ev("x*(1 + x^0.5)", 0.25) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x $ 2").is_err());
        assert!(Expr::parse("x x").is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let cases = [
            "x*(1 + x^0.5)",
            "4*x*(1 - x)",
            "log(1 + x) / (2 + x)",
            "abs(x - 0.3)^1.5",
            "exp(sin(x)) + sqrt(x) * cos(x)",
            "x^x",
            "-(2 - 2*x)",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            for &x in &[0.15, 0.4, 0.77] {
                let h = 1e-6;
                let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
                let an = d.eval(x);
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
                    "{src} at {x}: fd {fd} vs {an}"
                );
            }
        }
    }
}
