//! Arithmetic expression language for user supplied sequences `s_k`,
//! functions `s(u)` and integrands `f(x)`.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right associative *)
//! primary = number | constant | variable
//!         | function "(" expr { "," expr } ")"
//!         | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! constant = "e" | "pi" ;
//! variable = "u" | "k" | "x" ;
//! function = "sin" | "cos" | "exp" | "log" | "log1p" | "abs" | "floor" | "pow" ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`, while the exponent
//! may itself carry a sign (`2^-1`). Every error carries the byte offset of
//! the offending token or node.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for treating an exponent as an integer when the base is negative.
pub const INTEGRAL_EXPONENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    U,
    K,
    X,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::K => "k",
            Var::X => "x",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "u" => Some(Var::U),
            "k" => Some(Var::K),
            "x" => Some(Var::X),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Log1p,
    Abs,
    Floor,
    Pow,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Log1p => "log1p",
            Func::Abs => "abs",
            Func::Floor => "floor",
            Func::Pow => "pow",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "log1p" => Func::Log1p,
            "abs" => Func::Abs,
            "floor" => Func::Floor,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    E,
    Pi,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::E => std::f64::consts::E,
            Constant::Pi => std::f64::consts::PI,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Constant::E => "e",
            Constant::Pi => "pi",
        }
    }
}

/// Expression node. Equality is structural and ignores source offsets.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    /// Byte offset of the token that produced this node.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("invalid number literal `{0}`")]
    BadNumber(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("function `{func}` takes {expected} argument(s), got {found}")]
    WrongArity {
        func: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unbalanced parentheses")]
    UnbalancedParen,
    #[error("variable `{found}` is not allowed here (expected `{allowed}`)")]
    DisallowedVariable {
        found: String,
        allowed: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at byte {offset}: {kind}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalErrorKind {
    #[error("logarithm of non-positive argument {0}")]
    LogNonPositive(f64),
    #[error("negative base {base} raised to non-integer exponent {exponent}")]
    NegativeBaseFractionalExponent { base: f64, exponent: f64 },
    #[error("result is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b',' => out.push((Tok::Comma, i)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when followed by a digit (optionally signed)
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::BadNumber(lit.to_string()),
                    offset: start,
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        kind: ParseErrorKind::BadNumber(lit.to_string()),
                        offset: start,
                    });
                }
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    offset: i,
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    allowed: Var,
    _text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn err<T>(&self, kind: ParseErrorKind, offset: usize) -> Result<T, ParseError> {
        Err(ParseError { kind, offset })
    }

    fn unexpected<T>(&self) -> Result<T, ParseError> {
        match self.toks.get(self.pos) {
            None => self.err(ParseErrorKind::UnexpectedEnd, self.end),
            Some((Tok::RParen, o)) => self.err(ParseErrorKind::UnbalancedParen, *o),
            Some((t, o)) => self.err(ParseErrorKind::UnexpectedToken(t.describe()), *o),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let offset = self.offset();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            let offset = self.offset();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            let offset = self.offset();
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                offset,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Caret) = self.peek() {
            let offset = self.offset();
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                offset,
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, offset)) = self.toks.get(self.pos).cloned() else {
            return self.err(ParseErrorKind::UnexpectedEnd, self.end);
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr {
                    kind: ExprKind::Num(v),
                    offset,
                })
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    None => self.err(ParseErrorKind::UnbalancedParen, offset),
                    Some(_) => self.unexpected(),
                }
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    return self.call(func, offset);
                }
                match name.as_str() {
                    "e" => {
                        return Ok(Expr {
                            kind: ExprKind::Const(Constant::E),
                            offset,
                        })
                    }
                    "pi" => {
                        return Ok(Expr {
                            kind: ExprKind::Const(Constant::Pi),
                            offset,
                        })
                    }
                    _ => {}
                }
                match Var::from_name(&name) {
                    Some(v) if v == self.allowed => Ok(Expr {
                        kind: ExprKind::Var(v),
                        offset,
                    }),
                    Some(_) => self.err(
                        ParseErrorKind::DisallowedVariable {
                            found: name,
                            allowed: self.allowed.name(),
                        },
                        offset,
                    ),
                    None => self.err(ParseErrorKind::UnknownIdentifier(name), offset),
                }
            }
            _ => self.unexpected(),
        }
    }

    fn call(&mut self, func: Func, offset: usize) -> Result<Expr, ParseError> {
        let open = self.offset();
        match self.peek() {
            Some(Tok::LParen) => self.pos += 1,
            _ => return self.unexpected(),
        }
        let mut args = Vec::new();
        if let Some(Tok::RParen) = self.peek() {
            self.pos += 1;
        } else {
            loop {
                args.push(self.expr()?);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        break;
                    }
                    None => return self.err(ParseErrorKind::UnbalancedParen, open),
                    Some(_) => return self.unexpected(),
                }
            }
        }
        if args.len() != func.arity() {
            return self.err(
                ParseErrorKind::WrongArity {
                    func: func.name(),
                    expected: func.arity(),
                    found: args.len(),
                },
                offset,
            );
        }
        Ok(Expr {
            kind: ExprKind::Call(func, args),
            offset,
        })
    }
}

/// Parses `text` into an expression whose only free variable is `allowed_var`.
pub fn parse_expr(text: &str, allowed_var: Var) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::Empty,
            offset: 0,
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        allowed: allowed_var,
        _text: text,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.unexpected();
    }
    Ok(e)
}

fn checked(v: f64, offset: usize) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError {
            kind: EvalErrorKind::NonFinite,
            offset,
        })
    }
}

fn pow_checked(base: f64, exponent: f64, offset: usize) -> Result<f64, EvalError> {
    if base < 0.0 {
        let rounded = exponent.round();
        if (exponent - rounded).abs() > INTEGRAL_EXPONENT_TOL {
            return Err(EvalError {
                kind: EvalErrorKind::NegativeBaseFractionalExponent { base, exponent },
                offset,
            });
        }
        let magnitude = if rounded.abs() <= i32::MAX as f64 {
            (-base).powi(rounded as i32)
        } else {
            (-base).powf(rounded)
        };
        let odd = (rounded / 2.0).fract() != 0.0;
        return checked(if odd { -magnitude } else { magnitude }, offset);
    }
    checked(base.powf(exponent), offset)
}

#[derive(Clone, Copy)]
enum Binding {
    Linear(f64),
    /// The variable is `e^v`; `log(var)` evaluates to `v` without forming `e^v`.
    Log(f64),
}

fn log_checked(a: f64, offset: usize) -> Result<f64, EvalError> {
    if a <= 0.0 {
        Err(EvalError {
            kind: EvalErrorKind::LogNonPositive(a),
            offset,
        })
    } else {
        Ok(a.ln())
    }
}

impl Expr {
    /// Evaluates with the free variable bound to `value`.
    pub fn eval(&self, value: f64) -> Result<f64, EvalError> {
        self.eval_in(Binding::Linear(value))
    }

    /// Evaluates with the free variable bound to `e^log_value`. `log` applied
    /// directly to the variable yields `log_value`, so expressions such as
    /// `sin(log(log(u)))` stay finite far past the range of `e^v`.
    pub fn eval_log(&self, log_value: f64) -> Result<f64, EvalError> {
        self.eval_in(Binding::Log(log_value))
    }

    fn eval_in(&self, x: Binding) -> Result<f64, EvalError> {
        let offset = self.offset;
        match &self.kind {
            ExprKind::Num(v) => Ok(*v),
            ExprKind::Var(_) => match x {
                Binding::Linear(value) => checked(value, offset),
                Binding::Log(v) => checked(v.exp(), offset),
            },
            ExprKind::Const(c) => Ok(c.value()),
            ExprKind::Neg(inner) => Ok(-inner.eval_in(x)?),
            ExprKind::Binary(op, l, r) => {
                let a = l.eval_in(x)?;
                let b = r.eval_in(x)?;
                match op {
                    BinOp::Add => checked(a + b, offset),
                    BinOp::Sub => checked(a - b, offset),
                    BinOp::Mul => checked(a * b, offset),
                    BinOp::Div => checked(a / b, offset),
                    BinOp::Pow => pow_checked(a, b, offset),
                }
            }
            ExprKind::Call(Func::Log, args) if matches!(args[0].kind, ExprKind::Var(_)) => {
                match x {
                    Binding::Log(v) => Ok(v),
                    Binding::Linear(_) => log_checked(args[0].eval_in(x)?, offset),
                }
            }
            ExprKind::Call(func, args) => {
                let a = args[0].eval_in(x)?;
                match func {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => checked(a.exp(), offset),
                    Func::Abs => Ok(a.abs()),
                    Func::Floor => Ok(a.floor()),
                    Func::Log => log_checked(a, offset),
                    Func::Log1p => {
                        if a <= -1.0 {
                            Err(EvalError {
                                kind: EvalErrorKind::LogNonPositive(1.0 + a),
                                offset,
                            })
                        } else {
                            Ok(a.ln_1p())
                        }
                    }
                    Func::Pow => {
                        let b = args[1].eval_in(x)?;
                        pow_checked(a, b, offset)
                    }
                }
            }
        }
    }

    /// The variable this expression refers to, if any.
    pub fn free_var(&self) -> Option<Var> {
        match &self.kind {
            ExprKind::Var(v) => Some(*v),
            ExprKind::Num(_) | ExprKind::Const(_) => None,
            ExprKind::Neg(inner) => inner.free_var(),
            ExprKind::Binary(_, l, r) => l.free_var().or_else(|| r.free_var()),
            ExprKind::Call(_, args) => args.iter().find_map(Expr::free_var),
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, _, _) => op.precedence(),
            ExprKind::Neg(_) => 3,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v:?}"),
            ExprKind::Var(v) => f.write_str(v.name()),
            ExprKind::Const(c) => f.write_str(c.name()),
            ExprKind::Neg(inner) => {
                f.write_str("-")?;
                write_child(f, inner, inner.precedence() < 3)
            }
            ExprKind::Binary(BinOp::Pow, base, exponent) => {
                write_child(f, base, base.precedence() <= 4)?;
                f.write_str("^")?;
                write_child(f, exponent, exponent.precedence() < 3)
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                write_child(f, l, l.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, r, r.precedence() <= p)
            }
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
