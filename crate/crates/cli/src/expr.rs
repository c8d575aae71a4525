//! Arithmetic expressions in one variable `x`, with symbolic derivatives.
//!
//! Grammar: numbers, `x`, `pi`, `e`, `+ - * / ^`, unary minus, parentheses
//! and the functions `sin cos exp log`. `^` binds tighter than unary minus
//! and is right-associative, so `-x^2` is `-(x^2)` and `2^-1` is `0.5`.

use std::fmt;

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
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
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
            let value = text.parse().map_err(|_| ParseError {
                position: start,
                message: format!("bad number `{text}`"),
            })?;
            out.push((start, Token::Num(value)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Token::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Token::RParen));
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.here(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
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

    fn term(&mut self) -> Result<Expr, ParseError> {
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

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => Ok(Expr::Const(std::f64::consts::E)),
                    "sin" | "cos" | "exp" | "log" => {
                        if self.peek() != Some(&Token::LParen) {
                            return self.fail(format!("expected `(` after `{name}`"));
                        }
                        self.pos += 1;
                        let arg = Box::new(self.expr()?);
                        self.expect_rparen()?;
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            "exp" => Expr::Exp(arg),
                            _ => Expr::Log(arg),
                        })
                    }
                    _ => {
                        self.pos -= 1;
                        self.fail(format!("unknown identifier `{name}`"))
                    }
                }
            }
            Some(_) => self.fail("expected a number, `x`, a function or `(`"),
            None => self.fail("unexpected end of expression"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail("expected `)`")
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: src.chars().count(),
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return p.fail("trailing input");
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
            Expr::Pow(a, b) => match b.as_ref() {
                Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => a.eval(x).powi(*c as i32),
                _ => a.eval(x).powf(b.eval(x)),
            },
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Log(a) => a.eval(x).ln(),
        }
    }

    fn is_const(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) => a.is_const(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_const() && b.is_const()
            }
        }
    }

    /// Symbolic `d/dx`, lightly simplified.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let b = |e: Expr| Box::new(e);
        match self {
            Const(_) => Const(0.0),
            X => Const(1.0),
            Neg(a) => neg(a.derivative()),
            Add(u, v) => add(u.derivative(), v.derivative()),
            Sub(u, v) => sub(u.derivative(), v.derivative()),
            Mul(u, v) => add(mul(u.derivative(), (**v).clone()), mul((**u).clone(), v.derivative())),
            Div(u, v) => Div(
                b(sub(mul(u.derivative(), (**v).clone()), mul((**u).clone(), v.derivative()))),
                b(Pow(v.clone(), b(Const(2.0)))),
            ),
            Pow(u, v) if v.is_const() => {
                let c = v.eval(0.0);
                mul(mul(Const(c), Pow(u.clone(), b(Const(c - 1.0)))), u.derivative())
            }
            Pow(u, v) => mul(
                self.clone(),
                add(
                    mul(v.derivative(), Log(u.clone())),
                    Div(b(mul((**v).clone(), u.derivative())), u.clone()),
                ),
            ),
            Sin(u) => mul(Cos(u.clone()), u.derivative()),
            Cos(u) => mul(neg(Sin(u.clone())), u.derivative()),
            Exp(u) => mul(self.clone(), u.derivative()),
            Log(u) => Div(b(u.derivative()), u.clone()),
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (e, Expr::Const(z)) if z == 0.0 => e,
        (Expr::Const(z), e) if z == 0.0 => neg(e),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
        (Expr::Const(o), e) | (e, Expr::Const(o)) if o == 1.0 => e,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        Expr::parse(src).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("x^2/2", 3.0), 4.5);
        assert_eq!(ev("1.5e-1 * 2E1", 0.0), 3.0);
        assert_eq!(ev("(1 - x) * -(2)", 4.0), 6.0);
        assert!((ev("cos(pi)", 0.0) + 1.0).abs() < 1e-15);
        assert!((ev("log(e)", 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Expr::parse("x + y").unwrap_err();
        assert_eq!(err.position, 4);
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x x").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("x $ 2").is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cases = [
            "x^2/2 + 0.1*sin(x)",
            "exp(-x^2) * cos(3*x)",
            "log(1 + x^2)",
            "x / (2 + sin(x))",
            "(2 + cos(x))^(1 + x^2)",
            "-x^3 + 4",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            let dd = d.derivative();
            for &x in &[-1.7, -0.3, 0.0, 0.4, 2.1] {
                let h = 1e-5;
                let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
                assert!((d.eval(x) - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{src} at {x}");
                let fd2 = (d.eval(x + h) - d.eval(x - h)) / (2.0 * h);
                assert!((dd.eval(x) - fd2).abs() < 1e-5 * (1.0 + fd2.abs()), "{src}'' at {x}");
            }
        }
    }

    #[test]
    fn simplification_keeps_constants_small() {
        assert_eq!(Expr::parse("3").unwrap().derivative(), Expr::Const(0.0));
        assert_eq!(Expr::parse("x").unwrap().derivative(), Expr::Const(1.0));
        assert_eq!(Expr::parse("x^2/2").unwrap().derivative().derivative().eval(5.0), 1.0);
    }
}
