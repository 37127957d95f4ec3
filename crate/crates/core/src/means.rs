//! Cesàro `(C,1)` and logarithmic `(L,1)`, `(L,2)` means, continuous and
//! discrete, plus the running-integral assignment `s(u) = ∫_1^u f`.

use std::f64::consts::E;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::model::func::Weight;
use crate::model::{
    Abscissa, FuncSpec, Grid, LogPoint, RunningIntegral, Segment, SegmentBody, SeqSpec, Spec, Value,
};
use crate::par::{try_map_ordered, Execution};
use crate::quadrature::{integrate_between, QuadConfig, QuadResult};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum MeanKind {
    C1,
    L1,
    L2,
}

impl MeanKind {
    pub const ALL: [MeanKind; 3] = [MeanKind::C1, MeanKind::L1, MeanKind::L2];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPoint {
    pub abscissa: Abscissa,
    pub value: Value,
    /// Quadrature error estimate; 0 for discrete means.
    pub quad_error: f64,
    pub kind: MeanKind,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSeries {
    pub kind: MeanKind,
    pub points: Vec<MeanPoint>,
    /// SHA-256 of the spec, grid, kind and quadrature settings.
    pub fingerprint: String,
}

impl MeanSeries {
    pub fn soft_failures(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

/// Harmonic number `ℓ_n = Σ_{k≤n} 1/k`, summed forward with compensation.
pub fn harmonic(n: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for k in 1..=n {
        acc.add(1.0 / k as f64);
    }
    acc.value()
}

/// `ℓ_n(2) = Σ_{k≤n} 1/(k ℓ_k)`.
pub fn harmonic2(n: u64) -> f64 {
    let mut l = CompensatedSum::new();
    let mut acc = CompensatedSum::new();
    for k in 1..=n {
        l.add(1.0 / k as f64);
        acc.add(1.0 / (k as f64 * l.value()));
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// continuous

fn point_from(abscissa: Abscissa, kind: MeanKind, r: QuadResult, norm: f64) -> MeanPoint {
    MeanPoint {
        abscissa,
        value: Value::Real(r.value / norm),
        quad_error: r.error_estimate / norm.abs(),
        kind,
        converged: r.converged,
    }
}

/// `σ(t) = (1/t) ∫_{start}^t s(u) du`; the lower limit is the domain start.
pub fn cont_c1(f: &FuncSpec, t: f64, cfg: &QuadConfig) -> Result<MeanPoint> {
    let start = f.domain_start();
    if !(t > start) || !t.is_finite() {
        return Err(domain(format!(
            "(C,1) mean needs finite t > {start}, got {t}"
        )));
    }
    let r = integrate_between(
        f,
        &f.domain_start_point(),
        &LogPoint::from_u(t),
        0.0,
        Weight::Plain,
        cfg,
    )?;
    Ok(point_from(Abscissa::T(t), MeanKind::C1, r, t))
}

fn l1_at(f: &FuncSpec, to: LogPoint, abscissa: Abscissa, cfg: &QuadConfig) -> Result<MeanPoint> {
    let log_t = to.log();
    if !(log_t > 0.0) {
        return Err(domain(format!(
            "(L,1) mean needs t > 1, got log t = {log_t}"
        )));
    }
    let r = integrate_between(f, &LogPoint::from_u(1.0), &to, 0.0, Weight::Log, cfg)?;
    Ok(point_from(abscissa, MeanKind::L1, r, log_t))
}

/// `τ(t) = (1/log t) ∫_1^t s(u)/u du`.
pub fn cont_l1(f: &FuncSpec, t: f64, cfg: &QuadConfig) -> Result<MeanPoint> {
    l1_at(f, LogPoint::from_u(t), Abscissa::T(t), cfg)
}

/// [`cont_l1`] at `t = e^{log_t}`.
pub fn cont_l1_log(f: &FuncSpec, log_t: f64, cfg: &QuadConfig) -> Result<MeanPoint> {
    l1_at(f, LogPoint::from_log(log_t), Abscissa::LogT(log_t), cfg)
}

fn l2_at(f: &FuncSpec, to: LogPoint, abscissa: Abscissa, cfg: &QuadConfig) -> Result<MeanPoint> {
    let log_t = to.log();
    if !(log_t > 1.0) {
        return Err(domain(format!(
            "(L,2) mean needs t > e, got log t = {log_t}"
        )));
    }
    let r = integrate_between(f, &LogPoint::from_u(E), &to, 0.0, Weight::LogLog, cfg)?;
    Ok(point_from(abscissa, MeanKind::L2, r, log_t.ln()))
}

/// `τ₂(t) = (1/log log t) ∫_e^t s(u)/(u log u) du`.
pub fn cont_l2(f: &FuncSpec, t: f64, cfg: &QuadConfig) -> Result<MeanPoint> {
    l2_at(f, LogPoint::from_u(t), Abscissa::T(t), cfg)
}

/// [`cont_l2`] at `t = e^{log_t}`.
pub fn cont_l2_log(f: &FuncSpec, log_t: f64, cfg: &QuadConfig) -> Result<MeanPoint> {
    l2_at(f, LogPoint::from_log(log_t), Abscissa::LogT(log_t), cfg)
}

fn cont_at(f: &FuncSpec, x: Abscissa, kind: MeanKind, cfg: &QuadConfig) -> Result<MeanPoint> {
    match (kind, x) {
        (MeanKind::C1, Abscissa::T(t)) => cont_c1(f, t, cfg),
        (MeanKind::C1, Abscissa::LogT(v)) => {
            let t = v.exp();
            if !t.is_finite() {
                return Err(domain(format!(
                    "(C,1) mean needs representable t, got log t = {v}"
                )));
            }
            cont_c1(f, t, cfg).map(|p| MeanPoint { abscissa: x, ..p })
        }
        (MeanKind::L1, Abscissa::T(t)) => cont_l1(f, t, cfg),
        (MeanKind::L1, Abscissa::LogT(v)) => cont_l1_log(f, v, cfg),
        (MeanKind::L2, Abscissa::T(t)) => cont_l2(f, t, cfg),
        (MeanKind::L2, Abscissa::LogT(v)) => cont_l2_log(f, v, cfg),
        (_, Abscissa::N(_)) => Err(Error::InvalidGrid(
            "integer grid given for a function".into(),
        )),
    }
}

fn combine(re: MeanPoint, im: MeanPoint) -> MeanPoint {
    MeanPoint {
        value: Value::Complex {
            re: re.value.re(),
            im: im.value.re(),
        },
        quad_error: re.quad_error + im.quad_error,
        converged: re.converged && im.converged,
        ..re
    }
}

// ---------------------------------------------------------------------------
// discrete

/// Streaming accumulator for all three discrete means at once.
#[derive(Debug, Clone, Default)]
pub(crate) struct DiscreteAcc {
    k: u64,
    plain: CompensatedSum,
    l1: CompensatedSum,
    l2: CompensatedSum,
    ell: CompensatedSum,
    ell2: CompensatedSum,
}

impl DiscreteAcc {
    pub(crate) fn push(&mut self, s: f64) {
        self.k += 1;
        let k = self.k as f64;
        self.ell.add(1.0 / k);
        let ell = self.ell.value();
        self.ell2.add(1.0 / (k * ell));
        self.plain.add(s);
        self.l1.add(s / k);
        self.l2.add(s / (k * ell));
    }

    pub(crate) fn mean(&self, kind: MeanKind) -> f64 {
        match kind {
            MeanKind::C1 => self.plain.value() / self.k as f64,
            MeanKind::L1 => self.l1.value() / self.ell.value(),
            MeanKind::L2 => self.l2.value() / self.ell2.value(),
        }
    }

    /// `ℓ_k` for the last pushed index `k`.
    pub(crate) fn harmonic(&self) -> f64 {
        self.ell.value()
    }
}

/// Means of `kind` at every `n` of an increasing grid in one pass over `k`.
fn disc_stream(s: &SeqSpec, ns: &[u64], kind: MeanKind) -> Result<Vec<f64>> {
    let mut acc = DiscreteAcc::default();
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(Error::IndexZero(0));
        }
        while acc.k < n {
            acc.push(s.eval(acc.k + 1)?);
        }
        out.push(acc.mean(kind));
    }
    Ok(out)
}

fn disc_point(n: u64, kind: MeanKind, value: Value) -> MeanPoint {
    MeanPoint {
        abscissa: Abscissa::N(n),
        value,
        quad_error: 0.0,
        kind,
        converged: true,
    }
}

fn disc_one(s: &SeqSpec, n: u64, kind: MeanKind) -> Result<MeanPoint> {
    let v = disc_stream(s, &[n], kind)?[0];
    Ok(disc_point(n, kind, Value::Real(v)))
}

/// `σ_n = (1/n) Σ_{k≤n} s_k`.
pub fn disc_c1(s: &SeqSpec, n: u64) -> Result<MeanPoint> {
    disc_one(s, n, MeanKind::C1)
}

/// `τ_n = (1/ℓ_n) Σ_{k≤n} s_k/k`.
pub fn disc_l1(s: &SeqSpec, n: u64) -> Result<MeanPoint> {
    disc_one(s, n, MeanKind::L1)
}

/// `τ₂(n) = (1/ℓ_n(2)) Σ_{k≤n} s_k/(k ℓ_k)`.
pub fn disc_l2(s: &SeqSpec, n: u64) -> Result<MeanPoint> {
    disc_one(s, n, MeanKind::L2)
}

// ---------------------------------------------------------------------------
// series

fn fingerprint(spec: &Spec, grid: &Grid, kind: MeanKind, cfg: &QuadConfig) -> String {
    let text = format!("{spec:?}|{grid:?}|{kind:?}|{cfg:?}");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Means of `kind` over every grid point, in grid order.
///
/// Discrete series are computed in a single pass up to the largest `n`;
/// continuous points are independent and may run in parallel.
pub fn mean_series(
    spec: &Spec,
    grid: &Grid,
    kind: MeanKind,
    cfg: &QuadConfig,
    exec: Execution,
) -> Result<MeanSeries> {
    cfg.validate()?;
    let points = match (spec, grid) {
        (Spec::Seq(s), Grid::N(ns)) => disc_stream(s, ns, kind)?
            .into_iter()
            .zip(ns)
            .map(|(v, &n)| disc_point(n, kind, Value::Real(v)))
            .collect(),
        (Spec::ComplexSeq(c), Grid::N(ns)) => {
            let re = disc_stream(&c.re, ns, kind)?;
            let im = disc_stream(&c.im, ns, kind)?;
            re.into_iter()
                .zip(im)
                .zip(ns)
                .map(|((re, im), &n)| disc_point(n, kind, Value::Complex { re, im }))
                .collect()
        }
        (Spec::Func(f), Grid::T(_) | Grid::LogT(_)) => {
            try_map_ordered(&grid.abscissae(), exec, |&x| cont_at(f, x, kind, cfg))?
        }
        (Spec::ComplexFunc(c), Grid::T(_) | Grid::LogT(_)) => {
            try_map_ordered(&grid.abscissae(), exec, |&x| {
                Ok::<_, Error>(combine(
                    cont_at(&c.re, x, kind, cfg)?,
                    cont_at(&c.im, x, kind, cfg)?,
                ))
            })?
        }
        _ => {
            return Err(Error::InvalidGrid(
                "sequences need an integer grid and functions a t or log t grid".into(),
            ))
        }
    };
    Ok(MeanSeries {
        kind,
        points,
        fingerprint: fingerprint(spec, grid, kind, cfg),
    })
}

// ---------------------------------------------------------------------------
// integral mode

/// Checkpoint spacing used by [`integral_mode`].
pub const INTEGRAL_MODE_STEP: f64 = 1.0;

/// `s(u) = ∫_{start}^u f(x) dx` as a function spec.
pub fn integral_mode(f_integrand: FuncSpec) -> FuncSpec {
    integral_mode_with(f_integrand, INTEGRAL_MODE_STEP, QuadConfig::default())
}

pub fn integral_mode_with(f_integrand: FuncSpec, step: f64, cfg: QuadConfig) -> FuncSpec {
    let start = f_integrand.domain_start_point();
    let running = Arc::new(RunningIntegral::new(f_integrand, step, cfg));
    FuncSpec::from_segments(
        vec![Segment {
            start,
            body: SegmentBody::Running(running),
        }],
        None,
    )
    .expect("single segment from a valid spec")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BuiltinSeq, ComplexSeq, Var};

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic(1), 1.0);
        assert_eq!(harmonic(2), 1.5);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        assert_eq!(harmonic2(1), 1.0);
        assert!((harmonic2(2) - 4.0 / 3.0).abs() < 1e-15);
        assert!((harmonic2(3) - (4.0 / 3.0 + 2.0 / 11.0)).abs() < 1e-15);
    }

    #[test]
    fn discrete_examples() {
        let alt = SeqSpec::Builtin(BuiltinSeq::Alt);
        let alt_k = SeqSpec::parse("(-1)^k * k").unwrap();
        assert_eq!(disc_c1(&alt_k, 4).unwrap().value, Value::Real(0.5));
        assert!((disc_c1(&alt_k, 5).unwrap().value.re() + 0.6).abs() < 1e-15);
        assert!((disc_l1(&alt, 2).unwrap().value.re() + 1.0 / 3.0).abs() < 1e-15);
        assert!((disc_l2(&alt, 2).unwrap().value.re() + 0.5).abs() < 1e-15);
        let c = SeqSpec::constant(5.0);
        for n in [1, 7, 1000] {
            assert_eq!(disc_l1(&c, n).unwrap().value.re(), 5.0);
            assert_eq!(disc_l2(&c, n).unwrap().value.re(), 5.0);
        }
        let ell = SeqSpec::List(vec![1.0, 1.5, 11.0 / 6.0]);
        let v = disc_l2(&ell, 3).unwrap().value.re();
        assert!((v - harmonic(3) / harmonic2(3)).abs() < 1e-15);
        for n in [3, 10, 99, 1000] {
            assert!(disc_l1(&alt_k, n).unwrap().value.abs() <= 1.0 / harmonic(n) + 1e-15);
        }
    }

    #[test]
    fn continuous_examples() {
        let u = FuncSpec::expr(1.0, "u").unwrap();
        assert!((cont_c1(&u, 3.0, &cfg()).unwrap().value.re() - 4.0 / 3.0).abs() < 1e-12);
        let c = FuncSpec::expr(1.0, "2.5").unwrap();
        let v = cont_c1(&c, 1e6, &cfg()).unwrap().value.re();
        assert!((v - 2.5).abs() < 1e-5);
        assert!((cont_l1(&c, 1e6, &cfg()).unwrap().value.re() - 2.5).abs() < 1e-12);
        assert!((cont_l2(&c, 1e6, &cfg()).unwrap().value.re() - 2.5).abs() < 1e-12);

        let log_u = FuncSpec::expr(1.0, "log(u)").unwrap();
        let p = cont_l1(&log_u, E * E, &cfg()).unwrap();
        assert!((p.value.re() - 1.0).abs() < 1e-12);
        let ll = FuncSpec::new(vec![
            (
                1.0,
                SegmentBody::Analytic(crate::model::Analytic::Constant(0.0)),
            ),
            (
                E,
                SegmentBody::Expr(crate::model::parse_expr("log(log(u))", Var::U).unwrap()),
            ),
        ])
        .unwrap();
        let p = cont_l2(&ll, (E * E).exp(), &cfg()).unwrap();
        assert!((p.value.re() - 1.0).abs() < 1e-10);
        // log u at t = e^e: ∫_e^{e^e} du/u = e - 1, normalized by log log t = 1
        let p = cont_l2(&log_u, E.exp(), &cfg()).unwrap();
        assert!((p.value.re() - (E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn domain_checks() {
        let c = FuncSpec::constant(1.0, 1.0);
        assert!(cont_l1(&c, 1.0, &cfg()).is_err());
        assert!(cont_l2(&c, 2.0, &cfg()).is_err());
        assert!(cont_c1(&c, 0.5, &cfg()).is_err());
        assert!(disc_l1(&SeqSpec::constant(1.0), 0).is_err());
        assert!(disc_l1(&SeqSpec::List(vec![1.0]), 2).is_err());
    }

    #[test]
    fn series_matches_pointwise() {
        let s = SeqSpec::parse("sin(k) + (-1)^k").unwrap();
        let grid = Grid::n(vec![1, 5, 17, 400]).unwrap();
        for kind in MeanKind::ALL {
            let series = mean_series(
                &Spec::Seq(s.clone()),
                &grid,
                kind,
                &cfg(),
                Execution::Parallel,
            )
            .unwrap();
            for p in &series.points {
                let Abscissa::N(n) = p.abscissa else { panic!() };
                let one = disc_one(&s, n, kind).unwrap();
                assert_eq!(one.value.re().to_bits(), p.value.re().to_bits());
            }
        }
    }

    #[test]
    fn series_fingerprint_and_order() {
        let f = FuncSpec::expr(1.0, "log(u)").unwrap();
        let grid = Grid::t(vec![10.0, 100.0, 1000.0]).unwrap();
        let spec = Spec::Func(f);
        let a = mean_series(&spec, &grid, MeanKind::L1, &cfg(), Execution::Parallel).unwrap();
        let b = mean_series(&spec, &grid, MeanKind::L1, &cfg(), Execution::Sequential).unwrap();
        assert_eq!(a, b);
        for (p, t) in a.points.iter().zip([10.0f64, 100.0, 1000.0]) {
            assert!((p.value.re() - t.ln() / 2.0).abs() < 1e-10);
        }
        let c = mean_series(&spec, &grid, MeanKind::C1, &cfg(), Execution::Sequential).unwrap();
        assert_ne!(a.fingerprint, c.fingerprint);
    }

    #[test]
    fn complex_sequences_are_componentwise() {
        let z = ComplexSeq {
            re: SeqSpec::Builtin(BuiltinSeq::Alt),
            im: SeqSpec::constant(2.0),
        };
        let grid = Grid::n(vec![2]).unwrap();
        let s = mean_series(
            &Spec::ComplexSeq(z),
            &grid,
            MeanKind::L1,
            &cfg(),
            Execution::Sequential,
        )
        .unwrap();
        let v = s.points[0].value;
        assert!((v.re() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.im(), 2.0);
    }

    #[test]
    fn integral_mode_examples() {
        let zero = FuncSpec::expr_in(1.0, "0", Var::X).unwrap();
        let s = integral_mode(zero);
        assert_eq!(s.eval(17.5).unwrap(), 0.0);
        let inv = FuncSpec::expr_in(1.0, "1/x", Var::X).unwrap();
        let s = integral_mode(inv);
        assert!((s.eval(E).unwrap() - 1.0).abs() < 1e-9);
        let f = FuncSpec::expr_in(E, "1/(x*log(x))", Var::X).unwrap();
        let s = integral_mode(f);
        assert!((s.eval(E.exp()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn running_integral_means() {
        // s(u) = sin u - sin 1
        let s = integral_mode(FuncSpec::expr_in(1.0, "cos(x)", Var::X).unwrap());
        let cfg = QuadConfig::default();
        let t = 50.0f64;
        let s1 = 1f64.sin();
        let sigma = (1f64.cos() - t.cos() - (t - 1.0) * s1) / t;
        assert!((cont_c1(&s, t, &cfg).unwrap().value.re() - sigma).abs() < 1e-9);
        let tau = (crate::special::si(t) - crate::special::si(1.0) - s1 * t.ln()) / t.ln();
        assert!((cont_l1(&s, t, &cfg).unwrap().value.re() - tau).abs() < 1e-9);
        let direct = crate::quadrature::adaptive_simpson(
            |u: f64| Ok::<_, ()>((u.sin() - s1) / (u * u.ln())),
            E,
            t,
            &cfg,
        )
        .unwrap();
        let tau2 = direct.value / t.ln().ln();
        assert!((cont_l2(&s, t, &cfg).unwrap().value.re() - tau2).abs() < 1e-9);
    }
}
