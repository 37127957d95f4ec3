//! Built-in sequences and functions with known summability behavior.
//!
//! `thm3` is the plateau function
//!
//! ```text
//! s(u) = m e^{2^m}   on [e^{2^m}, e^{2^m} + 1),  m = 1, 2, ...
//!        0           elsewhere on [1, inf)
//! ```
//!
//! which is `(L,1)`-summable to 0 but not `(C,1)`-summable. Its plateaus
//! quickly leave the floating-point range, so every `thm3` helper takes
//! `log t` and works in the log domain.

use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::means::integral_mode;
use crate::model::{
    parse_expr, Analytic, BuiltinSeq, FuncSpec, LogPoint, Segment, SegmentBody, SeqSpec, Var,
};
use crate::special::{log1p_ratio, sici};

/// Plateaus `m = 1..=THM3_PLATEAUS` are materialized in [`thm3_func`]; the
/// next one starts at `log u = 2^{THM3_PLATEAUS + 1}`, which is also where
/// the function spec stops being evaluable.
pub const THM3_PLATEAUS: u32 = 9;

/// Whether a summation method assigns a limit, and which one if known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limit {
    pub holds: bool,
    pub value: Option<f64>,
}

impl Limit {
    pub const NONE: Limit = Limit {
        holds: false,
        value: None,
    };

    pub fn to(a: f64) -> Limit {
        Limit {
            holds: true,
            value: Some(a),
        }
    }

    /// Limit exists but has no closed form.
    pub const EXISTS: Limit = Limit {
        holds: true,
        value: None,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truth {
    pub has_ordinary_limit: Limit,
    pub c1_summable: Limit,
    pub l1_summable: Limit,
    pub l2_summable: Limit,
}

impl Truth {
    fn all(l: Limit) -> Truth {
        Truth {
            has_ordinary_limit: l,
            c1_summable: l,
            l1_summable: l,
            l2_summable: l,
        }
    }
}

pub type Oracle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SeqOracle = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// Closed-form evaluators for the means of an entry.
#[derive(Clone, Default)]
pub struct Oracles {
    /// `σ(t)` as a function of `t`.
    pub sigma: Option<Oracle>,
    /// `τ(t)` as a function of `log t`.
    pub tau: Option<Oracle>,
    /// `τ₂(t)` as a function of `log t`.
    pub tau2: Option<Oracle>,
    /// `σ_n` of the sequence view.
    pub sigma_n: Option<SeqOracle>,
}

impl fmt::Debug for Oracles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracles")
            .field("sigma", &self.sigma.is_some())
            .field("tau", &self.tau.is_some())
            .field("tau2", &self.tau2.is_some())
            .field("sigma_n", &self.sigma_n.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub seq: Option<SeqSpec>,
    pub func: Option<FuncSpec>,
    /// The integrand `f` when `func` is its running integral.
    pub integrand: Option<FuncSpec>,
    pub truth: Truth,
    pub oracles: Oracles,
    pub notes: &'static str,
}

impl CatalogEntry {
    pub fn kind(&self) -> &'static str {
        match (&self.seq, &self.func) {
            (Some(_), Some(_)) => "sequence+function",
            (Some(_), None) => "sequence",
            _ => "function",
        }
    }
}

/// Names accepted by [`catalog_get`]; parameterized entries take an
/// optional numeric argument, e.g. `const(5)`.
pub const CATALOG_NAMES: [&str; 8] = [
    "const",
    "log_u",
    "sin_loglog",
    "thm3",
    "alt",
    "alt_k",
    "c1_conv",
    "integrand_ok",
];

fn split_name(name: &str) -> Result<(&str, Option<f64>)> {
    let name = name.trim();
    let Some(open) = name.find('(') else {
        return Ok((name, None));
    };
    let (base, rest) = name.split_at(open);
    let arg = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::UnknownCatalog(name.to_string()))?;
    let v: f64 = arg
        .trim()
        .parse()
        .map_err(|_| Error::UnknownCatalog(name.to_string()))?;
    if !v.is_finite() {
        return Err(Error::UnknownCatalog(name.to_string()));
    }
    Ok((base.trim(), Some(v)))
}

fn oracle(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Option<Oracle> {
    Some(Arc::new(f))
}

fn zero_then(start: f64, text: &str, var: Var) -> FuncSpec {
    FuncSpec::new(vec![
        (1.0, SegmentBody::Analytic(Analytic::Constant(0.0))),
        (
            start,
            SegmentBody::Expr(parse_expr(text, var).expect("catalog expression parses")),
        ),
    ])
    .expect("catalog spec is valid")
}

/// Looks up a catalog entry by name, e.g. `"const(5)"`, `"thm3"`.
pub fn catalog_get(name: &str) -> Result<CatalogEntry> {
    let (base, arg) = split_name(name)?;
    let no_arg = |e: CatalogEntry| {
        if arg.is_some() {
            Err(Error::UnknownCatalog(name.to_string()))
        } else {
            Ok(e)
        }
    };
    match base {
        "const" => Ok(const_entry(arg.unwrap_or(1.0))),
        "c1_conv" => Ok(c1_conv_entry(arg.unwrap_or(1.0))),
        "log_u" => no_arg(log_u_entry()),
        "sin_loglog" => no_arg(sin_loglog_entry()),
        "thm3" => no_arg(thm3_entry()),
        "alt" => no_arg(alt_entry()),
        "alt_k" => no_arg(alt_k_entry()),
        "integrand_ok" => no_arg(integrand_ok_entry()),
        _ => Err(Error::UnknownCatalog(name.to_string())),
    }
}

/// Every entry with default parameters.
pub fn catalog_list() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|n| catalog_get(n).expect("registered name"))
        .collect()
}

fn const_entry(c: f64) -> CatalogEntry {
    CatalogEntry {
        name: format!("const({c})"),
        seq: Some(SeqSpec::constant(c)),
        func: Some(FuncSpec::constant(1.0, c)),
        integrand: None,
        truth: Truth::all(Limit::to(c)),
        oracles: Oracles {
            sigma: oracle(move |t| c * (t - 1.0) / t),
            tau: oracle(move |_| c),
            tau2: oracle(move |_| c),
            sigma_n: Some(Arc::new(move |_| c)),
        },
        notes: "s = c; every mean equals c",
    }
}

fn log_u_entry() -> CatalogEntry {
    CatalogEntry {
        name: "log_u".into(),
        seq: Some(SeqSpec::Builtin(BuiltinSeq::Log)),
        func: Some(FuncSpec::expr(1.0, "log(u)").expect("valid")),
        integrand: None,
        truth: Truth::all(Limit::NONE),
        oracles: Oracles {
            sigma: oracle(|t| (t * t.ln() - t + 1.0) / t),
            tau: oracle(|v| v / 2.0),
            tau2: oracle(|v| (v - 1.0) / v.ln()),
            sigma_n: None,
        },
        notes: "s(u) = log u, s_k = log k; unbounded, tau(t) = log(t)/2",
    }
}

/// `τ` of `sin(log log u)` at `log t = v >= 1`.
fn sin_loglog_tau(v: f64) -> f64 {
    if v <= 1.0 {
        return 0.0;
    }
    let w = v.ln();
    (v * (w.sin() - w.cos()) / 2.0 + 0.5) / v
}

fn sin_loglog_entry() -> CatalogEntry {
    CatalogEntry {
        name: "sin_loglog".into(),
        seq: None,
        func: Some(zero_then(E, "sin(log(log(u)))", Var::U)),
        integrand: None,
        truth: Truth {
            has_ordinary_limit: Limit::NONE,
            c1_summable: Limit::NONE,
            l1_summable: Limit::NONE,
            l2_summable: Limit::to(0.0),
        },
        oracles: Oracles {
            sigma: None,
            tau: oracle(sin_loglog_tau),
            tau2: oracle(|v| (1.0 - v.ln().cos()) / v.ln()),
            sigma_n: None,
        },
        notes: "s(u) = sin(log log u) for u >= e, 0 on [1, e); slowly oscillating \
                (modulus <= log lambda) but tau(t) keeps oscillating; tau_2 -> 0",
    }
}

fn alt_entry() -> CatalogEntry {
    CatalogEntry {
        name: "alt".into(),
        seq: Some(SeqSpec::Builtin(BuiltinSeq::Alt)),
        func: None,
        integrand: None,
        truth: Truth {
            has_ordinary_limit: Limit::NONE,
            c1_summable: Limit::to(0.0),
            l1_summable: Limit::to(0.0),
            l2_summable: Limit::to(0.0),
        },
        oracles: Oracles {
            sigma_n: Some(Arc::new(|n| if n % 2 == 0 { 0.0 } else { -1.0 / n as f64 })),
            ..Oracles::default()
        },
        notes: "s_k = (-1)^k; divergent, every mean tends to 0",
    }
}

fn alt_k_entry() -> CatalogEntry {
    CatalogEntry {
        name: "alt_k".into(),
        seq: Some(SeqSpec::Builtin(BuiltinSeq::AltK)),
        func: None,
        integrand: None,
        truth: Truth {
            has_ordinary_limit: Limit::NONE,
            c1_summable: Limit::NONE,
            l1_summable: Limit::to(0.0),
            l2_summable: Limit::to(0.0),
        },
        oracles: Oracles {
            sigma_n: Some(Arc::new(|n| {
                if n % 2 == 0 {
                    0.5
                } else {
                    let m = (n - 1) / 2;
                    -((m + 1) as f64) / n as f64
                }
            })),
            ..Oracles::default()
        },
        notes: "s_k = (-1)^k k; sigma_n alternates near +-1/2, |tau_n| <= 1/l_n",
    }
}

fn c1_conv_entry(a: f64) -> CatalogEntry {
    let (si1, ci1) = sici(1.0);
    let s1 = 1f64.sin();
    CatalogEntry {
        name: format!("c1_conv({a})"),
        seq: None,
        func: Some(FuncSpec::analytic(1.0, Analytic::DampedSine { level: a })),
        integrand: None,
        truth: Truth::all(Limit::to(a)),
        oracles: Oracles {
            sigma: oracle(move |t| (a * (t - 1.0) + sici(t).0 - si1) / t),
            tau: oracle(move |v| {
                let t = v.exp();
                // Ci(t) - sin(t)/t vanishes as t leaves the float range
                let g = if t.is_finite() {
                    sici(t).1 - t.sin() / t
                } else {
                    0.0
                };
                a + (g - (ci1 - s1)) / v
            }),
            tau2: None,
            sigma_n: None,
        },
        notes: "s(u) = A + sin(u)/u; converges to A",
    }
}

fn integrand_ok_entry() -> CatalogEntry {
    let f = zero_then(E, "sin(x)/(x*log(x))", Var::X);
    CatalogEntry {
        name: "integrand_ok".into(),
        seq: None,
        func: Some(integral_mode(f.clone())),
        integrand: Some(f),
        truth: Truth::all(Limit::EXISTS),
        oracles: Oracles::default(),
        notes: "s(u) = integral of f(x) = sin(x)/(x log x) (0 below e); \
                x log x |f(x)| <= 1 and s converges",
    }
}

fn thm3_entry() -> CatalogEntry {
    CatalogEntry {
        name: "thm3".into(),
        seq: None,
        func: Some(thm3_func()),
        integrand: None,
        truth: Truth {
            has_ordinary_limit: Limit::NONE,
            c1_summable: Limit::NONE,
            l1_summable: Limit::to(0.0),
            l2_summable: Limit::to(0.0),
        },
        oracles: Oracles {
            tau: oracle(thm3_tau_closed_form),
            ..Oracles::default()
        },
        notes: "plateaus of height m e^{2^m} on [e^{2^m}, e^{2^m} + 1); \
                (L,1)-summable to 0, (C,1) spikes (1/t) int_t^{t+1} s = m",
    }
}

// ---------------------------------------------------------------------------
// thm3

/// `log(e^{2^m} + 1) - 2^m = log1p(e^{-2^m})`. Underflows to 0 for
/// `m >= 10`; the true width is then below every positive `log u - 2^m`.
fn plateau_log_width(m: u32) -> f64 {
    (-2f64.powi(m as i32)).exp().ln_1p()
}

/// The plateau function on `[1, e^{2^{10}})`.
pub fn thm3_func() -> FuncSpec {
    let mut segs = vec![Segment {
        start: LogPoint::from_u(1.0),
        body: SegmentBody::Analytic(Analytic::Constant(0.0)),
    }];
    for m in 1..=THM3_PLATEAUS {
        let base = 2f64.powi(m as i32);
        let u = base.exp();
        segs.push(Segment {
            start: LogPoint::from_log_parts(base, 0.0, u),
            body: SegmentBody::Analytic(Analytic::Plateau { m }),
        });
        segs.push(Segment {
            start: LogPoint::from_log_parts(base, plateau_log_width(m), u + 1.0),
            body: SegmentBody::Analytic(Analytic::Constant(0.0)),
        });
    }
    let horizon = LogPoint::from_log(2f64.powi(THM3_PLATEAUS as i32 + 1));
    FuncSpec::from_segments(segs, Some(horizon)).expect("plateau layout is valid")
}

/// Plateau index `m` containing `u = e^{log_u}`, if any.
pub fn thm3_plateau_at_log(log_u: f64) -> Option<u32> {
    if !(log_u >= 2.0) || !log_u.is_finite() {
        return None;
    }
    let m = log_u.log2().floor() as i32;
    // log2 may round up just below a power of two
    let m = if 2f64.powi(m) > log_u { m - 1 } else { m };
    let base = 2f64.powi(m);
    // exact by Sterbenz: base <= log_u < 2 base
    let excess = log_u - base;
    (excess == 0.0 || excess < plateau_log_width(m as u32)).then_some(m as u32)
}

/// `log s(u)` at `u = e^{log_u}`; `None` where `s(u) = 0`.
pub fn thm3_value_log(log_u: f64) -> Option<f64> {
    thm3_plateau_at_log(log_u).map(|m| (m as f64).ln() + 2f64.powi(m as i32))
}

/// `s(u)`; membership is decided on `log u`. Infinite past `u ~ e^{1024}`
/// cannot occur for finite `u`.
pub fn thm3_value(u: f64) -> f64 {
    if !(u >= 1.0) {
        return 0.0;
    }
    match thm3_plateau_at_log(u.ln()) {
        Some(m) => m as f64 * 2f64.powi(m as i32).exp(),
        None => 0.0,
    }
}

/// `τ(t)` at `log t`, summed over the plateaus that end at or before `t`
/// plus the covered part of a plateau containing `t`.
///
/// The weighted mass of plateau `k` is `k e^{2^k} log1p(e^{-2^k})`, computed
/// as `k log1p_ratio(e^{-2^k})`; it equals `k` once `e^{-2^k}` underflows.
pub fn thm3_tau_closed_form(log_t: f64) -> f64 {
    if !(log_t > 0.0) {
        return 0.0;
    }
    let mut mass = crate::sum::CompensatedSum::new();
    let mut k = 1u32;
    loop {
        let base = 2f64.powi(k as i32);
        if base > log_t {
            break;
        }
        let x = (-base).exp();
        let excess = log_t - base;
        let width = plateau_log_width(k);
        if excess > 0.0 && excess >= width {
            mass.add(k as f64 * log1p_ratio(x));
        } else {
            // h * (log t - 2^k) with h = k e^{2^k}
            mass.add(k as f64 * (base + excess.ln()).exp());
        }
        k += 1;
    }
    mass.value() / log_t
}

/// The right-hand bound `m(m-1)/2^m` of the estimate on
/// `e^{2^{m-1}} <= t < e^{2^m}`.
pub fn thm3_block_bound(m: u32) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2f64.powf(m)
}

/// `(1/t) ∫_t^{t+1} s(u) du` at `t = e^{2^m}`: height over `t`, both carried
/// as exponents, which is `m` exactly.
pub fn thm3_sigma_spike(m: u32) -> f64 {
    let log_height_excess = 2f64.powi(m as i32) - 2f64.powi(m as i32);
    m as f64 * log_height_excess.exp()
}
