//! Window-condition profiles over a `(λ, t)` grid and their tail aggregates.

use serde::{Deserialize, Serialize};

use super::window::{
    discrete_window, slow_decrease_margin, slow_osc_modulus, window_avg, CellStatus, DiscreteNorm,
    Side, WindowAvg,
};
use crate::error::{Error, Result};
use crate::model::{Abscissa, Grid, SeqSpec, Spec, Value};
use crate::par::{try_map_ordered, Execution};
use crate::quadrature::QuadConfig;
use crate::sum::CompensatedSum;

pub const DEFAULT_UPPER_LAMBDAS: [f64; 6] = [2.0, 1.5, 1.25, 1.1, 1.05, 1.01];

/// Reciprocals of [`DEFAULT_UPPER_LAMBDAS`].
pub fn default_lower_lambdas() -> Vec<f64> {
    DEFAULT_UPPER_LAMBDAS.iter().map(|l| 1.0 / l).collect()
}

/// Default continuous grid: 15 points log-spaced over `[10, 1e8]`.
pub fn default_t_grid() -> Grid {
    Grid::log_spaced(10.0, 1e8, 15).expect("valid constant grid")
}

/// Default discrete grid: 4 points per decade over `[2, 1e4]` (`n = 1` has
/// no window).
pub fn default_n_grid() -> Grid {
    match Grid::n_log_spaced(0, 4, 4).expect("valid constant grid") {
        Grid::N(ns) => {
            Grid::n(ns.into_iter().filter(|&n| n >= 2).collect()).expect("still increasing")
        }
        _ => unreachable!(),
    }
}

/// Default tail length: the last quarter of the grid, at least one point.
pub fn default_tail(len: usize) -> usize {
    len.div_ceil(4).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub lambda_upper: Vec<f64>,
    pub lambda_lower: Vec<f64>,
    /// Number of trailing abscissae aggregated; `None` means a quarter.
    pub tail: Option<usize>,
    pub norm: DiscreteNorm,
    /// Discrete windows reaching past this index are skipped.
    pub max_window_index: u64,
    pub quad: QuadConfig,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            lambda_upper: DEFAULT_UPPER_LAMBDAS.to_vec(),
            lambda_lower: default_lower_lambdas(),
            tail: None,
            norm: DiscreteNorm::HarmonicIncrement,
            max_window_index: 100_000_000,
            quad: QuadConfig::default(),
            exec: Execution::Parallel,
        }
    }
}

/// Tail aggregate of one profile row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub side: Side,
    /// Infimum of the (real) window averages over the tail.
    pub tail_inf: Option<f64>,
    /// Supremum of `|window average|` over the tail.
    pub tail_sup_abs: Option<f64>,
    pub used: usize,
    pub empty: usize,
    pub skipped: usize,
    pub unconverged: usize,
}

/// Whether each aggregate moves the right way as `λ → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    /// Tail infimum is non-decreasing.
    pub inf_rises: bool,
    /// Tail supremum of `|.|` is non-increasing.
    pub sup_abs_falls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub upper: Vec<LambdaSummary>,
    pub lower: Vec<LambdaSummary>,
    pub upper_trend: Trend,
    pub lower_trend: Trend,
    /// Tail infimum of the slow-decrease margin, per upper λ.
    pub sd_tail_inf: Vec<Option<f64>>,
    /// Tail supremum of the slow-oscillation modulus, per upper λ.
    pub so_tail_sup: Vec<Option<f64>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauberianReport {
    pub abscissae: Vec<Abscissa>,
    pub lambda_upper: Vec<f64>,
    pub lambda_lower: Vec<f64>,
    pub tail: usize,
    /// Discrete normalization, `None` for functions.
    pub norm: Option<DiscreteNorm>,
    /// Rows follow `lambda_upper`, columns follow `abscissae`.
    pub upper_profile: Vec<Vec<WindowAvg>>,
    pub lower_profile: Vec<Vec<WindowAvg>>,
    pub sd_margin: Vec<Vec<Option<f64>>>,
    pub so_modulus: Vec<Vec<Option<f64>>>,
    pub verdict: Verdict,
}

impl TauberianReport {
    /// Rebuilds the verdict from the stored profiles.
    pub fn recompute_verdict(&self) -> Verdict {
        build_verdict(
            &self.upper_profile,
            &self.lower_profile,
            &self.sd_margin,
            &self.so_modulus,
            self.tail,
        )
    }

    pub fn soft_failures(&self) -> usize {
        self.upper_profile
            .iter()
            .chain(&self.lower_profile)
            .flatten()
            .filter(|w| w.status == CellStatus::Unconverged)
            .count()
    }
}

fn summarize(row: &[WindowAvg], tail: usize) -> LambdaSummary {
    let first = &row[0];
    let cells = &row[row.len() - tail..];
    let mut s = LambdaSummary {
        lambda: first.lambda,
        side: first.side,
        tail_inf: None,
        tail_sup_abs: None,
        used: 0,
        empty: 0,
        skipped: 0,
        unconverged: 0,
    };
    for c in cells {
        match c.status {
            CellStatus::Empty => s.empty += 1,
            CellStatus::Skipped => s.skipped += 1,
            CellStatus::Unconverged => s.unconverged += 1,
            CellStatus::Ok => {}
        }
        let Some(v) = c.value.filter(|_| c.usable()) else {
            continue;
        };
        s.used += 1;
        if !v.is_complex() {
            s.tail_inf = Some(s.tail_inf.map_or(v.re(), |m: f64| m.min(v.re())));
        }
        s.tail_sup_abs = Some(s.tail_sup_abs.map_or(v.abs(), |m: f64| m.max(v.abs())));
    }
    s
}

fn monotone(xs: impl Iterator<Item = Option<f64>>, rising: bool) -> bool {
    let vals: Vec<f64> = xs.flatten().collect();
    vals.windows(2)
        .all(|w| if rising { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn trend(rows: &[LambdaSummary]) -> Trend {
    // order by distance to 1, farthest first
    let mut order: Vec<&LambdaSummary> = rows.iter().collect();
    order.sort_by(|a, b| (b.lambda - 1.0).abs().total_cmp(&(a.lambda - 1.0).abs()));
    Trend {
        inf_rises: monotone(order.iter().map(|r| r.tail_inf), true),
        sup_abs_falls: monotone(order.iter().map(|r| r.tail_sup_abs), false),
    }
}

fn tail_fold(rows: &[Vec<Option<f64>>], tail: usize, pick_max: bool) -> Vec<Option<f64>> {
    rows.iter()
        .map(|row| {
            row[row.len() - tail..]
                .iter()
                .flatten()
                .copied()
                .reduce(|a, b| if pick_max { a.max(b) } else { a.min(b) })
        })
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"))
}

fn build_verdict(
    upper: &[Vec<WindowAvg>],
    lower: &[Vec<WindowAvg>],
    sd: &[Vec<Option<f64>>],
    so: &[Vec<Option<f64>>],
    tail: usize,
) -> Verdict {
    let up: Vec<LambdaSummary> = upper.iter().map(|r| summarize(r, tail)).collect();
    let lo: Vec<LambdaSummary> = lower.iter().map(|r| summarize(r, tail)).collect();
    let sd_tail_inf = tail_fold(sd, tail, false);
    let so_tail_sup = tail_fold(so, tail, true);
    let mut notes = Vec::new();
    for s in up.iter().chain(&lo) {
        notes.push(format!(
            "{:?} window, lambda = {}: tail inf {}, tail sup |.| {} over {} cells ({} empty, {} skipped, {} unconverged)",
            s.side,
            s.lambda,
            fmt_opt(s.tail_inf),
            fmt_opt(s.tail_sup_abs),
            s.used,
            s.empty,
            s.skipped,
            s.unconverged
        ));
    }
    for (i, s) in up.iter().enumerate() {
        notes.push(format!(
            "lambda = {}: tail inf of slow-decrease margin {}, tail sup of oscillation modulus {}",
            s.lambda,
            fmt_opt(sd_tail_inf.get(i).copied().flatten()),
            fmt_opt(so_tail_sup.get(i).copied().flatten())
        ));
    }
    Verdict {
        upper_trend: trend(&up),
        lower_trend: trend(&lo),
        upper: up,
        lower: lo,
        sd_tail_inf,
        so_tail_sup,
        notes,
    }
}

fn check_config(grid: &Grid, cfg: &ProfileConfig) -> Result<usize> {
    cfg.quad.validate()?;
    if cfg.lambda_upper.is_empty() && cfg.lambda_lower.is_empty() {
        return Err(Error::Domain("both lambda grids are empty".into()));
    }
    for &l in &cfg.lambda_upper {
        Side::Upper.check_lambda(l)?;
    }
    for &l in &cfg.lambda_lower {
        Side::Lower.check_lambda(l)?;
    }
    let tail = cfg.tail.unwrap_or_else(|| default_tail(grid.len()));
    if tail == 0 || tail > grid.len() {
        return Err(Error::InvalidGrid(format!(
            "tail {tail} must be in 1..={}",
            grid.len()
        )));
    }
    Ok(tail)
}

/// Profiles every Tauberian window condition of `spec` over `grid`.
pub fn condition_profile(spec: &Spec, grid: &Grid, cfg: &ProfileConfig) -> Result<TauberianReport> {
    let tail = check_config(grid, cfg)?;
    match (spec, grid) {
        (Spec::Seq(_) | Spec::ComplexSeq(_), Grid::N(ns)) => {
            if ns[0] < 2 {
                return Err(Error::InvalidGrid("discrete profiles need n >= 2".into()));
            }
        }
        (Spec::Func(_) | Spec::ComplexFunc(_), Grid::T(_) | Grid::LogT(_)) => {}
        _ => {
            return Err(Error::InvalidGrid(
                "sequences need an integer grid and functions a t or log t grid".into(),
            ))
        }
    }
    let xs = grid.abscissae();
    let (upper, lower, sd, so) = match spec {
        Spec::Seq(s) => discrete_profile(s, &xs, cfg)?,
        _ => generic_profile(spec, &xs, cfg)?,
    };
    let verdict = build_verdict(&upper, &lower, &sd, &so, tail);
    Ok(TauberianReport {
        abscissae: xs,
        lambda_upper: cfg.lambda_upper.clone(),
        lambda_lower: cfg.lambda_lower.clone(),
        tail,
        norm: spec.is_discrete().then_some(cfg.norm),
        upper_profile: upper,
        lower_profile: lower,
        sd_margin: sd,
        so_modulus: so,
        verdict,
    })
}

type Profiles = (
    Vec<Vec<WindowAvg>>,
    Vec<Vec<WindowAvg>>,
    Vec<Vec<Option<f64>>>,
    Vec<Vec<Option<f64>>>,
);

fn skipped(x: Abscissa, lambda: f64, side: Side) -> WindowAvg {
    WindowAvg {
        abscissa: x,
        lambda,
        side,
        value: None,
        quad_error: 0.0,
        status: CellStatus::Skipped,
    }
}

fn too_large(x: Abscissa, lambda: f64, cap: u64) -> Result<bool> {
    match x {
        Abscissa::N(n) => Ok(discrete_window(n, lambda, Side::Upper)?.1 > cap),
        _ => Ok(false),
    }
}

/// Cell-by-cell profile; used for functions and complex sequences.
fn generic_profile(spec: &Spec, xs: &[Abscissa], cfg: &ProfileConfig) -> Result<Profiles> {
    let cells = |lams: &[f64], side: Side| -> Vec<(usize, Abscissa, f64, Side)> {
        lams.iter()
            .enumerate()
            .flat_map(|(i, &l)| xs.iter().map(move |&x| (i, x, l, side)))
            .collect()
    };
    let reshape = |flat: Vec<WindowAvg>| -> Vec<Vec<WindowAvg>> {
        flat.chunks(xs.len()).map(|c| c.to_vec()).collect()
    };
    let eval = |&(_, x, l, side): &(usize, Abscissa, f64, Side)| -> Result<WindowAvg> {
        if side == Side::Upper && too_large(x, l, cfg.max_window_index)? {
            return Ok(skipped(x, l, side));
        }
        window_avg(spec, x, l, side, cfg.norm, &cfg.quad)
    };
    let up_cells = cells(&cfg.lambda_upper, Side::Upper);
    let upper = reshape(try_map_ordered(&up_cells, cfg.exec, eval)?);
    let lower = reshape(try_map_ordered(
        &cells(&cfg.lambda_lower, Side::Lower),
        cfg.exec,
        eval,
    )?);

    let real = !spec.is_complex();
    let margins = try_map_ordered(
        &up_cells,
        cfg.exec,
        |&(_, x, l, _)| -> Result<(Option<f64>, Option<f64>)> {
            if too_large(x, l, cfg.max_window_index)? {
                return Ok((None, None));
            }
            let sd = if real {
                slow_decrease_margin(spec, x, l)?
            } else {
                None
            };
            Ok((sd, slow_osc_modulus(spec, x, l)?))
        },
    )?;
    let sd = margins
        .chunks(xs.len())
        .map(|c| c.iter().map(|m| m.0).collect())
        .collect();
    let so = margins
        .chunks(xs.len())
        .map(|c| c.iter().map(|m| m.1).collect())
        .collect();
    Ok((upper, lower, sd, so))
}

/// Prefix data recorded at one index while streaming the sequence.
#[derive(Debug, Clone, Copy)]
struct Mark {
    index: u64,
    s: f64,
    /// `Σ_{k<=index} s_k/k`
    weighted: f64,
    /// `ℓ_index`
    ell: f64,
    /// min and max of `s_k` over `(previous mark, index]`
    block_min: f64,
    block_max: f64,
}

struct Stream {
    marks: Vec<Mark>,
}

impl Stream {
    fn build(s: &SeqSpec, mut indices: Vec<u64>) -> Result<Stream> {
        indices.sort_unstable();
        indices.dedup();
        let mut marks = Vec::with_capacity(indices.len());
        let mut weighted = CompensatedSum::new();
        let mut ell = CompensatedSum::new();
        let mut k = 0u64;
        for &idx in &indices {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut last = f64::NAN;
            while k < idx {
                k += 1;
                let sk = s.eval(k)?;
                weighted.add(sk / k as f64);
                ell.add(1.0 / k as f64);
                lo = lo.min(sk);
                hi = hi.max(sk);
                last = sk;
            }
            marks.push(Mark {
                index: idx,
                s: last,
                weighted: weighted.value(),
                ell: ell.value(),
                block_min: lo,
                block_max: hi,
            });
        }
        Ok(Stream { marks })
    }

    fn at(&self, index: u64) -> (usize, &Mark) {
        let i = self.marks.partition_point(|m| m.index < index);
        (i, &self.marks[i])
    }

    /// `(min, max)` of `s_k` over `(lo, hi]`.
    fn range(&self, lo: u64, hi: u64) -> (f64, f64) {
        let (a, _) = self.at(lo);
        let (b, _) = self.at(hi);
        self.marks[a + 1..=b]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(m, x), mk| {
                (m.min(mk.block_min), x.max(mk.block_max))
            })
    }
}

fn discrete_profile(s: &SeqSpec, xs: &[Abscissa], cfg: &ProfileConfig) -> Result<Profiles> {
    let ns: Vec<u64> = xs
        .iter()
        .map(|x| match x {
            Abscissa::N(n) => *n,
            _ => unreachable!("checked by condition_profile"),
        })
        .collect();
    let mut needed = ns.clone();
    let mut windows = |lams: &[f64], side: Side| -> Result<Vec<Vec<(u64, u64, bool)>>> {
        lams.iter()
            .map(|&l| {
                ns.iter()
                    .map(|&n| {
                        let (lo, hi) = discrete_window(n, l, side)?;
                        let skip = hi > cfg.max_window_index;
                        if !skip {
                            needed.push(lo);
                            needed.push(hi);
                        }
                        Ok((lo, hi, skip))
                    })
                    .collect()
            })
            .collect()
    };
    let up_w = windows(&cfg.lambda_upper, Side::Upper)?;
    let lo_w = windows(&cfg.lambda_lower, Side::Lower)?;
    let stream = Stream::build(s, needed)?;

    let cell = |n: u64, lambda: f64, side: Side, (lo, hi, skip): (u64, u64, bool)| -> WindowAvg {
        let x = Abscissa::N(n);
        if skip {
            return skipped(x, lambda, side);
        }
        let mut w = WindowAvg {
            abscissa: x,
            lambda,
            side,
            value: None,
            quad_error: 0.0,
            status: CellStatus::Empty,
        };
        if lo == hi {
            return w;
        }
        let (_, a) = stream.at(lo);
        let (_, b) = stream.at(hi);
        let (_, m) = stream.at(n);
        let d_ell = b.ell - a.ell;
        let sum = (b.weighted - a.weighted) - m.s * d_ell;
        let (total, count) = match side {
            Side::Upper => (sum, hi - n),
            Side::Lower => (-sum, n - lo),
        };
        let norm = match cfg.norm {
            DiscreteNorm::HarmonicIncrement => d_ell,
            DiscreteNorm::CountTimesHarmonic => count as f64 * m.ell,
        };
        w.value = Some(Value::Real(total / norm));
        w.status = CellStatus::Ok;
        w
    };
    let rows = |lams: &[f64], ws: &[Vec<(u64, u64, bool)>], side: Side| -> Vec<Vec<WindowAvg>> {
        lams.iter()
            .zip(ws)
            .map(|(&l, row)| {
                ns.iter()
                    .zip(row)
                    .map(|(&n, &w)| cell(n, l, side, w))
                    .collect()
            })
            .collect()
    };
    let upper = rows(&cfg.lambda_upper, &up_w, Side::Upper);
    let lower = rows(&cfg.lambda_lower, &lo_w, Side::Lower);

    let mut sd = Vec::with_capacity(up_w.len());
    let mut so = Vec::with_capacity(up_w.len());
    for row in &up_w {
        let mut sd_row = Vec::with_capacity(ns.len());
        let mut so_row = Vec::with_capacity(ns.len());
        for (&n, &(lo, hi, skip)) in ns.iter().zip(row) {
            if skip || lo == hi {
                sd_row.push(None);
                so_row.push(None);
                continue;
            }
            let sn = stream.at(n).1.s;
            let (mn, mx) = stream.range(lo, hi);
            sd_row.push(Some(mn - sn));
            so_row.push(Some((mx - sn).max(sn - mn)));
        }
        sd.push(sd_row);
        so.push(so_row);
    }
    Ok((upper, lower, sd, so))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BuiltinSeq, FuncSpec};

    #[test]
    fn constant_profiles_are_zero() {
        let spec = Spec::Seq(SeqSpec::constant(2.0));
        let grid = Grid::n_log_spaced(1, 3, 3).unwrap();
        let r = condition_profile(&spec, &grid, &ProfileConfig::default()).unwrap();
        for w in r.upper_profile.iter().chain(&r.lower_profile).flatten() {
            assert!(w.value.is_none_or(|v| v.re() == 0.0));
        }
        for s in &r.verdict.upper {
            assert_eq!(s.tail_inf, Some(0.0));
        }
        assert_eq!(r.recompute_verdict(), r.verdict);

        let f = Spec::Func(FuncSpec::constant(1.0, 2.0));
        let r = condition_profile(
            &f,
            &Grid::t_decades(1, 4).unwrap(),
            &ProfileConfig::default(),
        )
        .unwrap();
        for w in r.upper_profile.iter().chain(&r.lower_profile).flatten() {
            assert_eq!(w.value, Some(Value::Real(0.0)));
        }
    }

    #[test]
    fn streamed_profile_matches_direct_windows() {
        let s = SeqSpec::parse("(-1)^k * log(k) + sin(k)").unwrap();
        let spec = Spec::Seq(s.clone());
        let grid = Grid::n(vec![5, 12, 40, 333]).unwrap();
        for norm in [
            DiscreteNorm::HarmonicIncrement,
            DiscreteNorm::CountTimesHarmonic,
        ] {
            let cfg = ProfileConfig {
                norm,
                ..ProfileConfig::default()
            };
            let r = condition_profile(&spec, &grid, &cfg).unwrap();
            for w in r.upper_profile.iter().chain(&r.lower_profile).flatten() {
                let Abscissa::N(n) = w.abscissa else { panic!() };
                let d =
                    super::super::window::disc_window_with(&s, n, w.lambda, w.side, norm).unwrap();
                assert_eq!(d.status, w.status);
                if let (Some(a), Some(b)) = (d.value, w.value) {
                    assert!(
                        (a.re() - b.re()).abs() <= 1e-12 * (1.0 + a.abs()),
                        "{a:?} {b:?}"
                    );
                }
            }
            for (i, &l) in cfg.lambda_upper.iter().enumerate() {
                for (j, &n) in [5u64, 12, 40, 333].iter().enumerate() {
                    let m = slow_decrease_margin(&spec, Abscissa::N(n), l).unwrap();
                    assert_eq!(m.map(f64::to_bits), r.sd_margin[i][j].map(f64::to_bits));
                    let m = slow_osc_modulus(&spec, Abscissa::N(n), l).unwrap();
                    assert_eq!(m.map(f64::to_bits), r.so_modulus[i][j].map(f64::to_bits));
                }
            }
        }
    }

    #[test]
    fn alt_modulus_is_two() {
        let spec = Spec::Seq(SeqSpec::Builtin(BuiltinSeq::Alt));
        let grid = Grid::n_log_spaced(1, 3, 4).unwrap();
        let r = condition_profile(&spec, &grid, &ProfileConfig::default()).unwrap();
        for m in r.so_modulus.iter().flatten().flatten() {
            assert_eq!(*m, 2.0);
        }
    }

    #[test]
    fn oversized_windows_are_skipped() {
        let spec = Spec::Seq(SeqSpec::Builtin(BuiltinSeq::Alt));
        let grid = Grid::n(vec![10, 1000]).unwrap();
        let cfg = ProfileConfig {
            max_window_index: 10_000,
            ..ProfileConfig::default()
        };
        let r = condition_profile(&spec, &grid, &cfg).unwrap();
        // λ = 2 at n = 1000 needs 10^6 terms
        assert_eq!(r.upper_profile[0][1].status, CellStatus::Skipped);
        assert_eq!(r.verdict.upper[0].skipped, 1);
    }

    #[test]
    fn rejects_bad_lambdas() {
        let spec = Spec::Seq(SeqSpec::constant(1.0));
        let grid = Grid::n(vec![10, 20]).unwrap();
        let cfg = ProfileConfig {
            lambda_upper: vec![0.9],
            ..ProfileConfig::default()
        };
        assert!(condition_profile(&spec, &grid, &cfg).is_err());
        let cfg = ProfileConfig {
            tail: Some(3),
            ..ProfileConfig::default()
        };
        assert!(condition_profile(&spec, &grid, &cfg).is_err());
    }
}
