//! Sequences, functions, grids and the expression language used to define them.

pub mod expr;
pub mod func;
pub mod grid;
pub mod seq;

use serde::Serialize;

pub use expr::{
    parse_expr, EvalError, EvalErrorKind, Expr, ExprKind, ParseError, ParseErrorKind, Var,
};
pub use func::{eval_func, Analytic, FuncSpec, LogPoint, RunningIntegral, Segment, SegmentBody};
pub use grid::Grid;
pub use seq::{eval_seq, BuiltinSeq, SeqSpec};

/// Scalar result of a mean or window operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Value {
    pub fn re(&self) -> f64 {
        match *self {
            Value::Real(x) => x,
            Value::Complex { re, .. } => re,
        }
    }

    pub fn im(&self) -> f64 {
        match *self {
            Value::Real(_) => 0.0,
            Value::Complex { im, .. } => im,
        }
    }

    pub fn abs(&self) -> f64 {
        match *self {
            Value::Real(x) => x.abs(),
            Value::Complex { re, im } => re.hypot(im),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Value::Complex { .. })
    }

    /// `|self - other|`.
    pub fn distance(&self, other: &Value) -> f64 {
        let dr = self.re() - other.re();
        if self.is_complex() || other.is_complex() {
            dr.hypot(self.im() - other.im())
        } else {
            dr.abs()
        }
    }
}

/// Where a mean or window was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Abscissa {
    T(f64),
    /// `log t`, for abscissae past the floating-point range.
    LogT(f64),
    N(u64),
}

impl Abscissa {
    /// `log` of the abscissa.
    pub fn log(&self) -> f64 {
        match *self {
            Abscissa::T(t) => t.ln(),
            Abscissa::LogT(v) => v,
            Abscissa::N(n) => (n as f64).ln(),
        }
    }
}

/// A complex sequence carried as two real channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq {
    pub re: SeqSpec,
    pub im: SeqSpec,
}

/// A complex function carried as two real channels on the same domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFunc {
    pub re: FuncSpec,
    pub im: FuncSpec,
}

impl ComplexFunc {
    pub fn new(re: FuncSpec, im: FuncSpec) -> crate::Result<Self> {
        if re.domain_start() != im.domain_start() {
            return Err(crate::Error::InvalidSpec(format!(
                "real and imaginary channels start at {} and {}",
                re.domain_start(),
                im.domain_start()
            )));
        }
        Ok(ComplexFunc { re, im })
    }
}

/// Any input the means and window operations accept.
#[derive(Debug, Clone, PartialEq)]
pub enum Spec {
    Seq(SeqSpec),
    Func(FuncSpec),
    ComplexSeq(ComplexSeq),
    ComplexFunc(ComplexFunc),
}

impl Spec {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Spec::Seq(_) | Spec::ComplexSeq(_))
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Spec::ComplexSeq(_) | Spec::ComplexFunc(_))
    }
}

impl From<SeqSpec> for Spec {
    fn from(s: SeqSpec) -> Self {
        Spec::Seq(s)
    }
}

impl From<FuncSpec> for Spec {
    fn from(f: FuncSpec) -> Self {
        Spec::Func(f)
    }
}

impl From<ComplexSeq> for Spec {
    fn from(s: ComplexSeq) -> Self {
        Spec::ComplexSeq(s)
    }
}

impl From<ComplexFunc> for Spec {
    fn from(f: ComplexFunc) -> Self {
        Spec::ComplexFunc(f)
    }
}
