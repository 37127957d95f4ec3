use serde::{Deserialize, Serialize};

use super::expr::{parse_expr, Expr, Var};
use crate::error::{Error, Result};

/// Closed-form sequences shipped with the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinSeq {
    Const(f64),
    /// `(-1)^k`
    Alt,
    /// `(-1)^k k`
    AltK,
    /// `log k`
    Log,
}

impl BuiltinSeq {
    #[inline]
    fn term(self, k: u64) -> f64 {
        let even = k.is_multiple_of(2);
        match self {
            BuiltinSeq::Const(c) => c,
            BuiltinSeq::Alt => {
                if even {
                    1.0
                } else {
                    -1.0
                }
            }
            BuiltinSeq::AltK => {
                if even {
                    k as f64
                } else {
                    -(k as f64)
                }
            }
            BuiltinSeq::Log => (k as f64).ln(),
        }
    }
}

/// A deterministic source of terms `s_k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeqSpec {
    Expr(Expr),
    /// `list[0]` is `s_1`; indices past the end are an error.
    List(Vec<f64>),
    Builtin(BuiltinSeq),
}

impl SeqSpec {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(SeqSpec::Expr(parse_expr(text, Var::K)?))
    }

    pub fn constant(c: f64) -> Self {
        SeqSpec::Builtin(BuiltinSeq::Const(c))
    }

    /// Term `s_k`.
    #[inline]
    pub fn eval(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::IndexZero(k));
        }
        match self {
            SeqSpec::Builtin(b) => Ok(b.term(k)),
            SeqSpec::Expr(e) => Ok(e.eval(k as f64)?),
            SeqSpec::List(xs) => xs
                .get((k - 1) as usize)
                .copied()
                .ok_or(Error::IndexPastEnd {
                    index: k,
                    len: xs.len(),
                }),
        }
    }

    /// Largest index this spec can produce, if bounded.
    pub fn max_index(&self) -> Option<u64> {
        match self {
            SeqSpec::List(xs) => Some(xs.len() as u64),
            _ => None,
        }
    }
}

/// Free function form of [`SeqSpec::eval`].
pub fn eval_seq(s: &SeqSpec, k: u64) -> Result<f64> {
    s.eval(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        assert_eq!(eval_seq(&SeqSpec::constant(5.0), 17).unwrap(), 5.0);
        assert_eq!(
            eval_seq(&SeqSpec::Builtin(BuiltinSeq::Alt), 7).unwrap(),
            -1.0
        );
        assert_eq!(
            eval_seq(&SeqSpec::Builtin(BuiltinSeq::AltK), 6).unwrap(),
            6.0
        );
    }

    #[test]
    fn expression_terms() {
        let s = SeqSpec::parse("(-1)^k * k").unwrap();
        assert_eq!(s.eval(4).unwrap(), 4.0);
        assert_eq!(s.eval(5).unwrap(), -5.0);
    }

    #[test]
    fn list_errors_past_end() {
        let s = SeqSpec::List(vec![1.0, 2.0]);
        assert_eq!(s.eval(2).unwrap(), 2.0);
        assert_eq!(s.eval(3), Err(Error::IndexPastEnd { index: 3, len: 2 }));
        assert_eq!(s.eval(0), Err(Error::IndexZero(0)));
    }

    #[test]
    fn expression_matches_builtin() {
        let e = SeqSpec::parse("(-1)^k * k").unwrap();
        let b = SeqSpec::Builtin(BuiltinSeq::AltK);
        for k in 1..200 {
            assert_eq!(e.eval(k).unwrap(), b.eval(k).unwrap());
        }
    }
}
