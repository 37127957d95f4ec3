//! Piecewise functions `s(u)` on `[domain_start, inf)`.
//!
//! Breakpoints are stored as log-domain points so that catalog functions can
//! place segments at abscissae like `e^{2^m} + 1` whose linear value is not
//! representable with unit resolution.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, RwLock};

use super::expr::{parse_expr, Expr, Var};
use crate::error::{domain, Error, Result};
use crate::quadrature::{self, QuadConfig};
use crate::special::{log1p_ratio, sici};
use crate::sum::CompensatedSum;

const EPS: f64 = f64::EPSILON;

/// A point `u >= 1` carried as `log u = hi + lo` (normalized double-double)
/// together with its linear value when representable.
#[derive(Debug, Clone, Copy)]
pub struct LogPoint {
    hi: f64,
    lo: f64,
    u: f64,
    linear: bool,
}

impl LogPoint {
    /// Point given by its linear coordinate; comparisons against other linear
    /// points are exact.
    pub fn from_u(u: f64) -> Self {
        LogPoint {
            hi: u.ln(),
            lo: 0.0,
            u,
            linear: true,
        }
    }

    /// Point given by `log u`.
    pub fn from_log(v: f64) -> Self {
        LogPoint {
            hi: v,
            lo: 0.0,
            u: v.exp(),
            linear: false,
        }
    }

    /// Point with `log u = base + excess` where `excess` may be far below the
    /// resolution of `base`; `u` is the linear value (possibly rounded).
    pub fn from_log_parts(base: f64, excess: f64, u: f64) -> Self {
        let hi = base + excess;
        let lo = excess - (hi - base);
        LogPoint {
            hi,
            lo,
            u,
            linear: false,
        }
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn log(&self) -> f64 {
        self.hi
    }

    /// `log(other) - log(self)` with the low parts kept.
    #[inline]
    pub fn log_gap_to(&self, other: &LogPoint) -> f64 {
        (other.hi - self.hi) + (other.lo - self.lo)
    }

    pub fn cmp_point(&self, other: &LogPoint) -> Ordering {
        if self.linear && other.linear {
            return self.u.partial_cmp(&other.u).unwrap_or(Ordering::Equal);
        }
        match self.hi.partial_cmp(&other.hi).unwrap_or(Ordering::Equal) {
            Ordering::Equal => self.lo.partial_cmp(&other.lo).unwrap_or(Ordering::Equal),
            o => o,
        }
    }

    fn same(&self, other: &LogPoint) -> bool {
        self.cmp_point(other) == Ordering::Equal
    }
}

impl PartialEq for LogPoint {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
    }
}

/// Closed-form value of a segment integral with a rounding-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    pub error: f64,
}

impl ClosedForm {
    fn new(value: f64, magnitude: f64) -> Self {
        ClosedForm {
            value,
            error: 8.0 * EPS * magnitude.abs().max(value.abs()),
        }
    }
}

/// Catalog segments with known antiderivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analytic {
    Constant(f64),
    /// Height `m e^{2^m}` on `[e^{2^m}, e^{2^m} + 1)`.
    Plateau {
        m: u32,
    },
    /// `level + sin(u)/u`.
    DampedSine {
        level: f64,
    },
}

/// `sin(u)/u`, with its limit 0 at `u = inf`.
fn damped(u: f64) -> f64 {
    if u.is_finite() {
        u.sin() / u
    } else {
        0.0
    }
}

impl Analytic {
    pub fn plateau_height(m: u32) -> f64 {
        m as f64 * 2f64.powi(m as i32).exp()
    }

    pub fn value_at_u(&self, u: f64) -> f64 {
        match *self {
            Analytic::Constant(c) => c,
            Analytic::Plateau { m } => Self::plateau_height(m),
            Analytic::DampedSine { level } => level + damped(u),
        }
    }

    fn value_at_log(&self, v: f64) -> f64 {
        match self {
            Analytic::DampedSine { .. } => self.value_at_u(v.exp()),
            _ => self.value_at_u(f64::NAN),
        }
    }

    fn is_full(seg: &SegmentBounds, from: &LogPoint, to: &LogPoint) -> bool {
        from.same(&seg.start) && seg.end.is_some_and(|e| to.same(&e))
    }

    /// `∫ s(u)/u du` over `[from, to]`.
    fn weighted(&self, seg: &SegmentBounds, from: &LogPoint, to: &LogPoint) -> ClosedForm {
        let gap = from.log_gap_to(to);
        match *self {
            Analytic::Constant(c) => ClosedForm::new(c * gap, c * to.log()),
            Analytic::Plateau { m } => {
                if Self::is_full(seg, from, to) {
                    let x = (-2f64.powi(m as i32)).exp();
                    ClosedForm::new(m as f64 * log1p_ratio(x), m as f64)
                } else {
                    let v = Self::plateau_height(m) * gap;
                    ClosedForm::new(v, v)
                }
            }
            Analytic::DampedSine { level } => {
                // Ci(u) - sin(u)/u, which tends to 0 as u leaves the float range
                let g = |u: f64| {
                    if u.is_finite() {
                        sici(u).1 - damped(u)
                    } else {
                        0.0
                    }
                };
                let (ga, gb) = (g(from.u()), g(to.u()));
                let v = level * gap + (gb - ga);
                ClosedForm::new(v, level * to.log() + ga.abs() + gb.abs() + 1.0)
            }
        }
    }

    /// `∫ s(u) du` over `[from, to]`.
    fn plain(&self, seg: &SegmentBounds, from: &LogPoint, to: &LogPoint) -> ClosedForm {
        let (a, b) = (from.u(), to.u());
        match *self {
            Analytic::Constant(c) => ClosedForm::new(c * (b - a), c * b),
            Analytic::Plateau { m } => {
                let h = Self::plateau_height(m);
                if Self::is_full(seg, from, to) {
                    ClosedForm::new(h, h)
                } else {
                    ClosedForm::new(h * (b - a), h * b)
                }
            }
            Analytic::DampedSine { level } => {
                let v = level * (b - a) + (sici(b).0 - sici(a).0);
                ClosedForm::new(v, level * b + 4.0)
            }
        }
    }

    /// `∫ s(u)/(u log u) du` over `[from, to]`, when available.
    fn loglog(&self, seg: &SegmentBounds, from: &LogPoint, to: &LogPoint) -> Option<ClosedForm> {
        let ratio = from.log_gap_to(to) / from.log();
        match *self {
            Analytic::Constant(c) => Some(ClosedForm::new(c * ratio.ln_1p(), c * to.log().ln())),
            Analytic::Plateau { m } => {
                let v = if Self::is_full(seg, from, to) {
                    // h * log1p(gap / L) with h * gap = m log1p(x) / x, x = e^{-2^m}
                    let x = (-2f64.powi(m as i32)).exp();
                    let mass = m as f64 * log1p_ratio(x);
                    let l = from.log();
                    let gap = x * log1p_ratio(x);
                    mass / l * log1p_ratio(gap / l)
                } else {
                    Self::plateau_height(m) * ratio.ln_1p()
                };
                Some(ClosedForm::new(v, v))
            }
            Analytic::DampedSine { .. } => None,
        }
    }
}

/// Running integral `s(u) = ∫_{start}^{u} f(x) dx` evaluated against a fixed
/// checkpoint lattice so that values do not depend on query order.
pub struct RunningIntegral {
    integrand: FuncSpec,
    cfg: QuadConfig,
    step: f64,
    state: RwLock<RunningState>,
}

struct RunningState {
    prefix: Vec<f64>,
    acc: CompensatedSum,
}

const UNIFORM_CHECKPOINTS: usize = 4096;
const GEOMETRIC_RATIO: f64 = 1.0 + 1.0 / 64.0;

impl RunningIntegral {
    pub fn new(integrand: FuncSpec, step: f64, cfg: QuadConfig) -> Self {
        RunningIntegral {
            integrand,
            cfg,
            step,
            state: RwLock::new(RunningState {
                prefix: vec![0.0],
                acc: CompensatedSum::new(),
            }),
        }
    }

    pub fn integrand(&self) -> &FuncSpec {
        &self.integrand
    }

    fn start(&self) -> f64 {
        self.integrand.domain_start()
    }

    fn checkpoint(&self, j: usize) -> f64 {
        let start = self.start();
        if j <= UNIFORM_CHECKPOINTS {
            start + j as f64 * self.step
        } else {
            let base = start + UNIFORM_CHECKPOINTS as f64 * self.step;
            base * GEOMETRIC_RATIO.powi((j - UNIFORM_CHECKPOINTS) as i32)
        }
    }

    fn index_below(&self, u: f64) -> usize {
        let start = self.start();
        let uniform_end = self.checkpoint(UNIFORM_CHECKPOINTS);
        let mut j = if u < uniform_end {
            ((u - start) / self.step).floor().max(0.0) as usize
        } else {
            UNIFORM_CHECKPOINTS
                + ((u / uniform_end).ln() / GEOMETRIC_RATIO.ln())
                    .floor()
                    .max(0.0) as usize
        };
        while j > 0 && self.checkpoint(j) > u {
            j -= 1;
        }
        while self.checkpoint(j + 1) <= u {
            j += 1;
        }
        j
    }

    fn chunk(&self, a: f64, b: f64) -> Result<f64> {
        let r = quadrature::integrate_plain(&self.integrand, a, b, &self.cfg)?;
        if !r.converged {
            return Err(Error::RunningIntegral { a, b });
        }
        Ok(r.value)
    }

    fn prefix(&self, j: usize) -> Result<f64> {
        {
            let st = self.state.read().expect("running integral lock poisoned");
            if let Some(v) = st.prefix.get(j) {
                return Ok(*v);
            }
        }
        let mut st = self.state.write().expect("running integral lock poisoned");
        while st.prefix.len() <= j {
            let i = st.prefix.len() - 1;
            let c = self.chunk(self.checkpoint(i), self.checkpoint(i + 1))?;
            st.acc.add(c);
            let v = st.acc.value();
            st.prefix.push(v);
        }
        Ok(st.prefix[j])
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        let start = self.start();
        if u < start {
            return Err(domain(format!("running integral queried at {u} < {start}")));
        }
        let j = self.index_below(u);
        let base = self.prefix(j)?;
        let c = self.checkpoint(j);
        if u == c {
            return Ok(base);
        }
        Ok(base + self.chunk(c, u)?)
    }
}

impl fmt::Debug for RunningIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunningIntegral")
            .field("integrand", &self.integrand)
            .field("step", &self.step)
            .field("cfg", &self.cfg)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum SegmentBody {
    Expr(Expr),
    Analytic(Analytic),
    Running(Arc<RunningIntegral>),
}

impl PartialEq for SegmentBody {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SegmentBody::Expr(a), SegmentBody::Expr(b)) => a == b,
            (SegmentBody::Analytic(a), SegmentBody::Analytic(b)) => a == b,
            (SegmentBody::Running(a), SegmentBody::Running(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl SegmentBody {
    #[inline]
    pub fn eval_u(&self, u: f64) -> Result<f64> {
        match self {
            SegmentBody::Expr(e) => Ok(e.eval(u)?),
            SegmentBody::Analytic(a) => Ok(a.value_at_u(u)),
            SegmentBody::Running(r) => r.value(u),
        }
    }

    /// Value at `u = e^v`.
    #[inline]
    pub fn eval_log(&self, v: f64) -> Result<f64> {
        match self {
            SegmentBody::Analytic(a) => Ok(a.value_at_log(v)),
            SegmentBody::Expr(e) => Ok(e.eval_log(v)?),
            SegmentBody::Running(r) => r.value(v.exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: LogPoint,
    pub body: SegmentBody,
}

/// Bounds of one segment; `end` is `None` for the unbounded last segment.
#[derive(Debug, Clone, Copy)]
pub struct SegmentBounds {
    pub start: LogPoint,
    pub end: Option<LogPoint>,
}

/// Which weight an integral carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weight {
    Plain,
    Log,
    LogLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncSpec {
    segments: Vec<Segment>,
    /// Evaluation is refused at or past this point.
    horizon: Option<LogPoint>,
}

impl FuncSpec {
    /// Builds a piecewise function from `(start_u, body)` pairs. The first
    /// start is the domain start; starts must be strictly increasing.
    pub fn new(pieces: Vec<(f64, SegmentBody)>) -> Result<Self> {
        let segments = pieces
            .into_iter()
            .map(|(a, body)| Segment {
                start: LogPoint::from_u(a),
                body,
            })
            .collect();
        let f = Self::from_segments(segments, None)?;
        f.spot_check()?;
        Ok(f)
    }

    pub fn from_segments(segments: Vec<Segment>, horizon: Option<LogPoint>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(Error::InvalidSpec("no segments".into()));
        };
        if !(first.start.u() >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "domain start {} must be >= 1",
                first.start.u()
            )));
        }
        for w in segments.windows(2) {
            if w[0].start.cmp_point(&w[1].start) != Ordering::Less {
                return Err(Error::InvalidSpec(format!(
                    "segment starts must be strictly increasing ({} then {})",
                    w[0].start.u(),
                    w[1].start.u()
                )));
            }
        }
        Ok(FuncSpec { segments, horizon })
    }

    /// Single expression in `u` on `[domain_start, inf)`.
    pub fn expr(domain_start: f64, text: &str) -> Result<Self> {
        Self::expr_in(domain_start, text, Var::U)
    }

    /// Single expression in `var`; integrands use `x`.
    pub fn expr_in(domain_start: f64, text: &str, var: Var) -> Result<Self> {
        let e = parse_expr(text, var)?;
        Self::new(vec![(domain_start, SegmentBody::Expr(e))])
    }

    pub fn analytic(domain_start: f64, a: Analytic) -> Self {
        FuncSpec {
            segments: vec![Segment {
                start: LogPoint::from_u(domain_start),
                body: SegmentBody::Analytic(a),
            }],
            horizon: None,
        }
    }

    pub fn constant(domain_start: f64, c: f64) -> Self {
        Self::analytic(domain_start, Analytic::Constant(c))
    }

    pub fn domain_start(&self) -> f64 {
        self.segments[0].start.u()
    }

    pub fn domain_start_point(&self) -> LogPoint {
        self.segments[0].start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> Option<LogPoint> {
        self.horizon
    }

    pub fn bounds(&self, i: usize) -> SegmentBounds {
        SegmentBounds {
            start: self.segments[i].start,
            end: self.segments.get(i + 1).map(|s| s.start),
        }
    }

    /// Segment starts after the first one.
    pub fn breakpoints(&self) -> impl Iterator<Item = LogPoint> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    fn spot_check(&self) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !matches!(seg.body, SegmentBody::Expr(_)) {
                continue;
            }
            let b = self.bounds(i);
            let a = b.start.u();
            let probes: Vec<f64> = match b.end {
                Some(e) => (1..8).map(|j| a + (e.u() - a) * j as f64 / 8.0).collect(),
                None => (0..8).map(|j| a + 2f64.powi(j)).collect(),
            };
            for u in probes {
                let v = seg.body.eval_u(u)?;
                if !v.is_finite() {
                    return Err(Error::InvalidSpec(format!("non-finite value at u = {u}")));
                }
            }
        }
        Ok(())
    }

    fn check_point(&self, p: &LogPoint) -> Result<()> {
        if p.cmp_point(&self.domain_start_point()) == Ordering::Less {
            return Err(domain(format!(
                "u = {} lies below the domain start {}",
                p.u(),
                self.domain_start()
            )));
        }
        if let Some(h) = self.horizon {
            if p.cmp_point(&h) != Ordering::Less {
                return Err(domain(format!(
                    "log u = {} is at or past the representable horizon log u = {}",
                    p.log(),
                    h.log()
                )));
            }
        }
        Ok(())
    }

    /// Index of the segment containing `p` (half-open convention).
    pub fn segment_index(&self, p: &LogPoint) -> usize {
        let n = self
            .segments
            .partition_point(|s| s.start.cmp_point(p) != Ordering::Greater);
        n.saturating_sub(1)
    }

    pub fn eval_point(&self, p: &LogPoint) -> Result<f64> {
        self.check_point(p)?;
        let seg = &self.segments[self.segment_index(p)];
        if p.linear {
            seg.body.eval_u(p.u())
        } else {
            seg.body.eval_log(p.log())
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        self.eval_point(&LogPoint::from_u(u))
    }

    pub fn eval_log(&self, v: f64) -> Result<f64> {
        self.eval_point(&LogPoint::from_log(v))
    }

    /// Splits `[a, b]` at interior breakpoints; yields `(segment index, from, to)`.
    pub(crate) fn pieces(
        &self,
        a: &LogPoint,
        b: &LogPoint,
    ) -> Result<Vec<(usize, LogPoint, LogPoint)>> {
        self.check_point(a)?;
        if let Some(h) = self.horizon {
            if b.cmp_point(&h) == Ordering::Greater {
                return Err(domain(format!(
                    "log u = {} is past the representable horizon log u = {}",
                    b.log(),
                    h.log()
                )));
            }
        }
        let mut out = Vec::new();
        let mut i = self.segment_index(a);
        let mut from = *a;
        loop {
            match self.segments.get(i + 1).map(|s| s.start) {
                Some(next) if next.cmp_point(b) == Ordering::Less => {
                    out.push((i, from, next));
                    from = next;
                    i += 1;
                }
                _ => {
                    out.push((i, from, *b));
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Closed-form integral of segment `i` over `[from, to]` if the body has one.
    pub(crate) fn closed_form(
        &self,
        i: usize,
        weight: Weight,
        from: &LogPoint,
        to: &LogPoint,
    ) -> Option<ClosedForm> {
        let SegmentBody::Analytic(a) = &self.segments[i].body else {
            return None;
        };
        let bounds = self.bounds(i);
        match weight {
            Weight::Plain => Some(a.plain(&bounds, from, to)),
            Weight::Log => Some(a.weighted(&bounds, from, to)),
            Weight::LogLog => a.loglog(&bounds, from, to),
        }
    }
}

/// Free function form of [`FuncSpec::eval`].
pub fn eval_func(f: &FuncSpec, u: f64) -> Result<f64> {
    f.eval(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_piece() {
        let f = FuncSpec::expr(1.0, "log(u)").unwrap();
        assert!((eval_func(&f, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!(eval_func(&f, 0.5).is_err());
    }

    #[test]
    fn half_open_segments() {
        let f = FuncSpec::new(vec![
            (1.0, SegmentBody::Analytic(Analytic::Constant(1.0))),
            (2.0, SegmentBody::Analytic(Analytic::Constant(2.0))),
            (3.0, SegmentBody::Analytic(Analytic::Constant(3.0))),
        ])
        .unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert_eq!(f.eval(1.999).unwrap(), 1.0);
        assert_eq!(f.eval(2.0).unwrap(), 2.0);
        assert_eq!(f.eval(3.0).unwrap(), 3.0);
        assert_eq!(f.eval(1e300).unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_layouts() {
        let c = |v| SegmentBody::Analytic(Analytic::Constant(v));
        assert!(FuncSpec::new(vec![]).is_err());
        assert!(FuncSpec::new(vec![(0.5, c(1.0))]).is_err());
        assert!(FuncSpec::new(vec![(1.0, c(1.0)), (1.0, c(2.0))]).is_err());
        assert!(FuncSpec::new(vec![(1.0, c(1.0)), (3.0, c(2.0)), (2.0, c(3.0))]).is_err());
    }

    #[test]
    fn spot_check_catches_domain_errors() {
        assert!(FuncSpec::expr(1.0, "log(2 - u)").is_err());
    }

    #[test]
    fn log_parts_ordering() {
        let base = 64.0;
        let excess = (-64f64).exp();
        let end = LogPoint::from_log_parts(base, excess, base.exp() + 1.0);
        let start = LogPoint::from_log(base);
        assert_eq!(start.cmp_point(&end), Ordering::Less);
        assert_eq!(start.log_gap_to(&end), excess);
        let m1 = LogPoint::from_log_parts(2.0, 1f64.ln_1p(), 0.0);
        assert_eq!(LogPoint::from_log(2.5).cmp_point(&m1), Ordering::Less);
    }

    #[test]
    fn pieces_split_at_breakpoints() {
        let c = |v| SegmentBody::Analytic(Analytic::Constant(v));
        let f = FuncSpec::new(vec![(1.0, c(1.0)), (2.0, c(2.0)), (4.0, c(3.0))]).unwrap();
        let p = f
            .pieces(&LogPoint::from_u(1.5), &LogPoint::from_u(5.0))
            .unwrap();
        let idx: Vec<usize> = p.iter().map(|x| x.0).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        let p = f
            .pieces(&LogPoint::from_u(2.0), &LogPoint::from_u(4.0))
            .unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn running_integral_is_order_independent() {
        let f = FuncSpec::expr_in(1.0, "1/x", Var::X).unwrap();
        let r1 = RunningIntegral::new(f.clone(), 0.5, QuadConfig::default());
        let r2 = RunningIntegral::new(f, 0.5, QuadConfig::default());
        let a = r1.value(7.3).unwrap();
        let _ = r2.value(50.0).unwrap();
        let b = r2.value(7.3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - 7.3f64.ln()).abs() < 1e-10);
    }
}
