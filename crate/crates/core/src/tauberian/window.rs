//! Window averages, slow-decrease margins and slow-oscillation moduli.
//!
//! Continuous windows run between `log t` and `λ log t` and never form
//! `t^λ` linearly. Discrete windows are defined by one predicate,
//! `log k / log n <= λ`, from which `[n^λ]` is derived.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::func::Weight;
use crate::model::{Abscissa, FuncSpec, LogPoint, SeqSpec, Spec, Value};
use crate::quadrature::{integrate_between, QuadConfig};
use crate::sum::CompensatedSum;

/// Relative slack in the window predicate so that exact powers such as
/// `4^{1/2} = 2` land inside the window despite rounding in `log`.
const SNAP: f64 = 4.0 * f64::EPSILON;

/// Number of log-uniform probes in a continuous window.
pub const WINDOW_PROBES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `(t, t^λ]` with `λ > 1`.
    Upper,
    /// `(t^λ, t]` with `0 < λ < 1`.
    Lower,
}

impl Side {
    pub fn check_lambda(self, lambda: f64) -> Result<()> {
        let ok = match self {
            Side::Upper => lambda > 1.0 && lambda.is_finite(),
            Side::Lower => lambda > 0.0 && lambda < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!(
                "lambda = {lambda} is not valid for the {self:?} window"
            )))
        }
    }
}

/// Normalization of a discrete window sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteNorm {
    /// `([n^λ] - n) ℓ_n` (upper) or `(n - [n^λ]) ℓ_n` (lower).
    CountTimesHarmonic,
    /// `ℓ_{[n^λ]} - ℓ_n` (upper) or `ℓ_n - ℓ_{[n^λ]}` (lower), the weight
    /// appearing in the discrete representation identity.
    HarmonicIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// `[n^λ] = n`; excluded from aggregates.
    Empty,
    /// Quadrature did not reach tolerance; the value is a best estimate.
    Unconverged,
    /// The window exceeded the configured term budget and was not summed.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowAvg {
    pub abscissa: Abscissa,
    pub lambda: f64,
    pub side: Side,
    /// `None` for empty or skipped windows.
    pub value: Option<Value>,
    pub quad_error: f64,
    pub status: CellStatus,
}

impl WindowAvg {
    pub fn usable(&self) -> bool {
        matches!(self.status, CellStatus::Ok | CellStatus::Unconverged)
    }
}

// ---------------------------------------------------------------------------
// discrete windows

/// `log k / log n <= λ`, the single definition of discrete window membership.
#[inline]
pub fn within_ratio(k: u64, n: u64, lambda: f64) -> bool {
    (k as f64).ln() / (n as f64).ln() <= lambda * (1.0 + SNAP)
}

/// `[n^λ]`: the largest `k` with `log k / log n <= λ`.
pub fn discrete_window_end(n: u64, lambda: f64) -> Result<u64> {
    if n < 2 {
        return Err(domain(format!("discrete windows need n >= 2, got {n}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let guess = (lambda * (n as f64).ln()).exp();
    if !(guess < 1.8e19) {
        return Err(domain(format!("[n^λ] overflows for n = {n}, λ = {lambda}")));
    }
    let mut k = (guess.floor() as u64).max(1);
    while k > 1 && !within_ratio(k, n, lambda) {
        k -= 1;
    }
    while within_ratio(k + 1, n, lambda) {
        k += 1;
    }
    Ok(k)
}

/// Index range `(lo, hi]` of the window, as `(lo, hi)`.
pub(crate) fn discrete_window(n: u64, lambda: f64, side: Side) -> Result<(u64, u64)> {
    side.check_lambda(lambda)?;
    let end = discrete_window_end(n, lambda)?;
    Ok(match side {
        Side::Upper => (n, end),
        Side::Lower => (end, n),
    })
}

pub(crate) fn discrete_norm(n: u64, end: u64, side: Side, norm: DiscreteNorm) -> f64 {
    let ell = |m: u64| crate::means::harmonic(m);
    match (norm, side) {
        (DiscreteNorm::CountTimesHarmonic, Side::Upper) => (end - n) as f64 * ell(n),
        (DiscreteNorm::CountTimesHarmonic, Side::Lower) => (n - end) as f64 * ell(n),
        (DiscreteNorm::HarmonicIncrement, _) => harmonic_between(n.min(end), n.max(end)),
    }
}

/// `ℓ_hi - ℓ_lo = Σ_{lo<k<=hi} 1/k`.
pub(crate) fn harmonic_between(lo: u64, hi: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for k in lo + 1..=hi {
        acc.add(1.0 / k as f64);
    }
    acc.value()
}

/// `Σ_{k in window} (s_k - s_n)/k`, signed so that the lower window sums
/// `(s_n - s_k)/k`.
pub(crate) fn discrete_window_sum(
    s: &SeqSpec,
    n: u64,
    lo: u64,
    hi: u64,
    side: Side,
) -> Result<f64> {
    let sn = s.eval(n)?;
    let mut acc = CompensatedSum::new();
    for k in lo + 1..=hi {
        acc.add((s.eval(k)? - sn) / k as f64);
    }
    Ok(match side {
        Side::Upper => acc.value(),
        Side::Lower => -acc.value(),
    })
}

fn disc_window(
    s: &SeqSpec,
    n: u64,
    lambda: f64,
    side: Side,
    norm: DiscreteNorm,
) -> Result<WindowAvg> {
    let (lo, hi) = discrete_window(n, lambda, side)?;
    let empty = lo == hi;
    let value = if empty {
        None
    } else {
        let end = if side == Side::Upper { hi } else { lo };
        let total = discrete_window_sum(s, n, lo, hi, side)?;
        Some(Value::Real(total / discrete_norm(n, end, side, norm)))
    };
    Ok(WindowAvg {
        abscissa: Abscissa::N(n),
        lambda,
        side,
        value,
        quad_error: 0.0,
        status: if empty {
            CellStatus::Empty
        } else {
            CellStatus::Ok
        },
    })
}

/// `(1/(([n^λ]-n) ℓ_n)) Σ_{k=n+1}^{[n^λ]} (s_k - s_n)/k` for `λ > 1`.
pub fn disc_window_upper(s: &SeqSpec, n: u64, lambda: f64) -> Result<WindowAvg> {
    disc_window(s, n, lambda, Side::Upper, DiscreteNorm::CountTimesHarmonic)
}

/// `(1/((n-[n^λ]) ℓ_n)) Σ_{k=[n^λ]+1}^{n} (s_n - s_k)/k` for `0 < λ < 1`.
pub fn disc_window_lower(s: &SeqSpec, n: u64, lambda: f64) -> Result<WindowAvg> {
    disc_window(s, n, lambda, Side::Lower, DiscreteNorm::CountTimesHarmonic)
}

pub fn disc_window_with(
    s: &SeqSpec,
    n: u64,
    lambda: f64,
    side: Side,
    norm: DiscreteNorm,
) -> Result<WindowAvg> {
    disc_window(s, n, lambda, side, norm)
}

// ---------------------------------------------------------------------------
// continuous windows

fn point_of(x: Abscissa) -> Result<LogPoint> {
    match x {
        Abscissa::T(t) => Ok(LogPoint::from_u(t)),
        Abscissa::LogT(v) => Ok(LogPoint::from_log(v)),
        Abscissa::N(_) => Err(Error::InvalidGrid(
            "integer abscissa given for a function".into(),
        )),
    }
}

/// Returns `(average, error estimate, converged)`.
fn cont_window_parts(
    f: &FuncSpec,
    at: &LogPoint,
    lambda: f64,
    side: Side,
    cfg: &QuadConfig,
) -> Result<(f64, f64, bool)> {
    side.check_lambda(lambda)?;
    let log_t = at.log();
    if !(log_t > 0.0) {
        return Err(domain(format!(
            "window averages need t > 1, got log t = {log_t}"
        )));
    }
    let st = f.eval_point(at)?;
    let other = LogPoint::from_log(lambda * log_t);
    let (r, norm, sign) = match side {
        Side::Upper => (
            integrate_between(f, at, &other, st, Weight::Log, cfg)?,
            (lambda - 1.0) * log_t,
            1.0,
        ),
        Side::Lower => (
            integrate_between(f, &other, at, st, Weight::Log, cfg)?,
            (1.0 - lambda) * log_t,
            -1.0,
        ),
    };
    Ok((sign * r.value / norm, r.error_estimate / norm, r.converged))
}

fn cont_window(
    f: &FuncSpec,
    x: Abscissa,
    lambda: f64,
    side: Side,
    cfg: &QuadConfig,
) -> Result<WindowAvg> {
    let at = point_of(x)?;
    let (v, err, ok) = cont_window_parts(f, &at, lambda, side, cfg)?;
    Ok(WindowAvg {
        abscissa: x,
        lambda,
        side,
        value: Some(Value::Real(v)),
        quad_error: err,
        status: if ok {
            CellStatus::Ok
        } else {
            CellStatus::Unconverged
        },
    })
}

/// `(1/((λ-1) log t)) ∫_t^{t^λ} (s(u) - s(t))/u du` for `λ > 1`.
pub fn window_avg_upper(f: &FuncSpec, t: f64, lambda: f64, cfg: &QuadConfig) -> Result<WindowAvg> {
    cont_window(f, Abscissa::T(t), lambda, Side::Upper, cfg)
}

/// `(1/((1-λ) log t)) ∫_{t^λ}^t (s(t) - s(u))/u du` for `0 < λ < 1`.
pub fn window_avg_lower(f: &FuncSpec, t: f64, lambda: f64, cfg: &QuadConfig) -> Result<WindowAvg> {
    cont_window(f, Abscissa::T(t), lambda, Side::Lower, cfg)
}

/// [`window_avg_upper`] at `t = e^{log_t}`.
pub fn window_avg_upper_log(
    f: &FuncSpec,
    log_t: f64,
    lambda: f64,
    cfg: &QuadConfig,
) -> Result<WindowAvg> {
    cont_window(f, Abscissa::LogT(log_t), lambda, Side::Upper, cfg)
}

/// [`window_avg_lower`] at `t = e^{log_t}`.
pub fn window_avg_lower_log(
    f: &FuncSpec,
    log_t: f64,
    lambda: f64,
    cfg: &QuadConfig,
) -> Result<WindowAvg> {
    cont_window(f, Abscissa::LogT(log_t), lambda, Side::Lower, cfg)
}

/// Window average for any spec. Discrete windows use `norm`; continuous
/// ones ignore it.
pub fn window_avg(
    spec: &Spec,
    x: Abscissa,
    lambda: f64,
    side: Side,
    norm: DiscreteNorm,
    cfg: &QuadConfig,
) -> Result<WindowAvg> {
    match (spec, x) {
        (Spec::Seq(s), Abscissa::N(n)) => disc_window(s, n, lambda, side, norm),
        (Spec::ComplexSeq(c), Abscissa::N(n)) => {
            let re = disc_window(&c.re, n, lambda, side, norm)?;
            let im = disc_window(&c.im, n, lambda, side, norm)?;
            Ok(WindowAvg {
                value: re.value.zip(im.value).map(|(a, b)| Value::Complex {
                    re: a.re(),
                    im: b.re(),
                }),
                ..re
            })
        }
        (Spec::Func(f), _) => cont_window(f, x, lambda, side, cfg),
        (Spec::ComplexFunc(c), _) => {
            let re = cont_window(&c.re, x, lambda, side, cfg)?;
            let im = cont_window(&c.im, x, lambda, side, cfg)?;
            let ok = re.status == CellStatus::Ok && im.status == CellStatus::Ok;
            Ok(WindowAvg {
                value: Some(Value::Complex {
                    re: re.value.map_or(f64::NAN, |v| v.re()),
                    im: im.value.map_or(f64::NAN, |v| v.re()),
                }),
                quad_error: re.quad_error + im.quad_error,
                status: if ok {
                    CellStatus::Ok
                } else {
                    CellStatus::Unconverged
                },
                ..re
            })
        }
        _ => Err(Error::InvalidGrid(
            "sequences need integer abscissae".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// margins and moduli

/// Points probed in the continuous window `(t, t^λ]`: log-uniform samples
/// plus every breakpoint inside the window.
pub fn window_probes(f: &FuncSpec, at: &LogPoint, lambda: f64) -> Vec<LogPoint> {
    let log_t = at.log();
    let width = (lambda - 1.0) * log_t;
    let end = LogPoint::from_log(lambda * log_t);
    let mut pts: Vec<LogPoint> = (1..=WINDOW_PROBES)
        .map(|i| LogPoint::from_log(log_t + width * i as f64 / WINDOW_PROBES as f64))
        .collect();
    pts.extend(f.breakpoints().filter(|b| {
        at.cmp_point(b) == std::cmp::Ordering::Less
            && b.cmp_point(&end) != std::cmp::Ordering::Greater
    }));
    pts
}

/// Differences `s(u) - s(t)` over the continuous probes.
fn cont_differences(f: &FuncSpec, at: &LogPoint, lambda: f64) -> Result<Vec<f64>> {
    let st = f.eval_point(at)?;
    window_probes(f, at, lambda)
        .iter()
        .map(|p| Ok(f.eval_point(p)? - st))
        .collect()
}

fn fold_window<F: FnMut(f64, f64) -> f64>(
    s: &SeqSpec,
    n: u64,
    lambda: f64,
    init: f64,
    mut op: F,
) -> Result<Option<f64>> {
    let (lo, hi) = discrete_window(n, lambda, Side::Upper)?;
    if lo == hi {
        return Ok(None);
    }
    let sn = s.eval(n)?;
    let mut acc = init;
    for k in lo + 1..=hi {
        acc = op(acc, s.eval(k)? - sn);
    }
    Ok(Some(acc))
}

/// `min (s_u - s_t)` over the upper window; `None` for an empty discrete
/// window. Continuous windows are probed, discrete ones scanned exactly.
pub fn slow_decrease_margin(spec: &Spec, x: Abscissa, lambda: f64) -> Result<Option<f64>> {
    Side::Upper.check_lambda(lambda)?;
    match (spec, x) {
        (Spec::Seq(s), Abscissa::N(n)) => fold_window(s, n, lambda, f64::INFINITY, f64::min),
        (Spec::Func(f), _) => {
            let d = cont_differences(f, &point_of(x)?, lambda)?;
            Ok(Some(d.into_iter().fold(f64::INFINITY, f64::min)))
        }
        (Spec::ComplexSeq(_) | Spec::ComplexFunc(_), _) => {
            Err(domain("slow decrease is defined for real specs only"))
        }
        _ => Err(Error::InvalidGrid(
            "sequences need integer abscissae".into(),
        )),
    }
}

/// `max |s_u - s_t|` over the upper window; `None` for an empty discrete window.
pub fn slow_osc_modulus(spec: &Spec, x: Abscissa, lambda: f64) -> Result<Option<f64>> {
    Side::Upper.check_lambda(lambda)?;
    match (spec, x) {
        (Spec::Seq(s), Abscissa::N(n)) => fold_window(s, n, lambda, 0.0, |m, d| m.max(d.abs())),
        (Spec::Func(f), _) => {
            let d = cont_differences(f, &point_of(x)?, lambda)?;
            Ok(Some(d.into_iter().fold(0.0, |m, d| m.max(d.abs()))))
        }
        (Spec::ComplexSeq(c), Abscissa::N(n)) => {
            let (lo, hi) = discrete_window(n, lambda, Side::Upper)?;
            if lo == hi {
                return Ok(None);
            }
            let (rn, im_n) = (c.re.eval(n)?, c.im.eval(n)?);
            let mut m = 0.0f64;
            for k in lo + 1..=hi {
                m = m.max((c.re.eval(k)? - rn).hypot(c.im.eval(k)? - im_n));
            }
            Ok(Some(m))
        }
        (Spec::ComplexFunc(c), _) => {
            let at = point_of(x)?;
            let dr = cont_differences(&c.re, &at, lambda)?;
            let di = cont_differences(&c.im, &at, lambda)?;
            if dr.len() != di.len() {
                return Err(domain(
                    "real and imaginary channels have different breakpoints",
                ));
            }
            Ok(Some(
                dr.iter().zip(&di).fold(0.0, |m, (a, b)| m.max(a.hypot(*b))),
            ))
        }
        _ => Err(Error::InvalidGrid(
            "sequences need integer abscissae".into(),
        )),
    }
}
