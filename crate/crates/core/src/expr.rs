//! Expression language for immersion components and chart vector fields.
//!
//! Grammar (left-associative, standard precedence):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-'? power
//! power  := atom ('^' intlit)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimal with an optional exponent; there is no implicit
//! multiplication and `^` only accepts integer literal exponents. Names
//! resolve against the declared chart variables first, then against the
//! built-in constants `pi`, `sigma`, `sigma_bar`, `phi`, `phi_bar` (the
//! metallic constants bind to numeric values at evaluation time, so a parsed
//! tree can serve any parameter pair).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstName {
    Pi,
    Sigma,
    SigmaBar,
    Phi,
    PhiBar,
}

impl ConstName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstName::Pi => "pi",
            ConstName::Sigma => "sigma",
            ConstName::SigmaBar => "sigma_bar",
            ConstName::Phi => "phi",
            ConstName::PhiBar => "phi_bar",
        }
    }

    fn from_str(s: &str) -> Option<ConstName> {
        Some(match s {
            "pi" => ConstName::Pi,
            "sigma" => ConstName::Sigma,
            "sigma_bar" => ConstName::SigmaBar,
            "phi" => ConstName::Phi,
            "phi_bar" => ConstName::PhiBar,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn as_str(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_str(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Parsed expression tree. Variables are stored as indices into the chart
/// variable list supplied at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(usize),
    Const(ConstName),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn number(x: f64) -> Expr {
        Expr::Number(x)
    }

    pub fn sum(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn product(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    /// Largest variable index + 1 appearing in the tree.
    pub fn max_var_bound(&self) -> usize {
        match self {
            Expr::Number(_) | Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) => e.max_var_bound(),
            Expr::Bin(_, a, b) => a.max_var_bound().max(b.max_var_bound()),
            Expr::Pow(e, _) => e.max_var_bound(),
            Expr::Call(_, e) => e.max_var_bound(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

/// Parses `src` against the declared chart variables.
pub fn parse(src: &str, vars: &[String]) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

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
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => BinOp::Add,
                b'-' => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => BinOp::Mul,
                b'/' => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.power()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.int_literal()?;
            return Ok(Expr::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.err("expected integer exponent"));
        }
        // A '.' or exponent marker here means a non-integer literal was written.
        if matches!(self.src.get(self.pos), Some(b'.') | Some(b'e') | Some(b'E')) {
            self.pos = start;
            return Err(self.err("exponent must be an integer literal"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<i32>().map_err(|_| {
            self.pos = start;
            self.err("integer exponent out of range")
        })
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.err("expected number, name or '('")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                // 'e' belonged to a following name, not this literal.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| {
            self.pos = start;
            self.err("malformed number literal")
        })?;
        Ok(Expr::Number(value))
    }

    fn name(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii name");
        if self.peek() == Some(b'(') {
            let func = Func::from_str(name).ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("unknown function `{name}`"),
            })?;
            self.pos += 1; // '('
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if let Some(idx) = self.vars.iter().position(|v| v == name) {
            return Ok(Expr::Var(idx));
        }
        if let Some(c) = ConstName::from_str(name) {
            return Ok(Expr::Const(c));
        }
        Err(Error::Parse {
            offset: start,
            message: format!("unknown identifier `{name}`"),
        })
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

/// Renders a tree back to source; `parse(print(e)) == e` structurally.
pub fn print(e: &Expr, vars: &[String]) -> String {
    fn child(e: &Expr, vars: &[String], min_prec: u8) -> String {
        let s = print(e, vars);
        if precedence(e) < min_prec {
            format!("({s})")
        } else {
            s
        }
    }
    match e {
        Expr::Number(x) => {
            if *x == x.trunc() && x.abs() < 1e15 && *x >= 0.0 {
                format!("{}", *x as i64)
            } else {
                format!("{x:?}")
            }
        }
        Expr::Var(i) => vars[*i].clone(),
        Expr::Const(c) => c.as_str().to_string(),
        Expr::Neg(inner) => format!("-{}", child(inner, vars, 4)),
        Expr::Bin(op, a, b) => {
            let (sym, prec) = match op {
                BinOp::Add => ("+", 1),
                BinOp::Sub => ("-", 1),
                BinOp::Mul => ("*", 2),
                BinOp::Div => ("/", 2),
            };
            // All four operators parse left-associative, so a right child of
            // equal precedence must be parenthesized to keep the tree shape.
            format!(
                "{} {sym} {}",
                child(a, vars, prec),
                child(b, vars, prec + 1)
            )
        }
        Expr::Pow(base, k) => format!("{}^{k}", child(base, vars, 5)),
        Expr::Call(f, arg) => format!("{}({})", f.as_str(), print(arg, vars)),
    }
}
