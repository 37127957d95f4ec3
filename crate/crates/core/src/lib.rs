//! Cesàro and logarithmic summability means for sequences and functions,
//! finite-scale Tauberian window diagnostics, and checks of the
//! representation identities that connect them.

// `!(x > a)` is used on purpose so NaN fails domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod identities;
pub mod means;
pub mod model;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod sum;
pub mod tauberian;

pub use error::{Error, Result};
