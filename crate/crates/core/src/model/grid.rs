//! Evaluation grids over `t`, `log t` or `n`.

use serde::{Deserialize, Serialize};

use super::Abscissa;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "points", rename_all = "snake_case")]
pub enum Grid {
    T(Vec<f64>),
    LogT(Vec<f64>),
    N(Vec<u64>),
}

fn check_increasing<T: PartialOrd + Copy + std::fmt::Debug>(xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidGrid("grid is empty".into()));
    }
    for w in xs.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing ({:?} then {:?})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl Grid {
    pub fn t(points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite t".into()));
        }
        check_increasing(&points)?;
        Ok(Grid::T(points))
    }

    pub fn log_t(points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite log t".into()));
        }
        check_increasing(&points)?;
        Ok(Grid::LogT(points))
    }

    pub fn n(points: Vec<u64>) -> Result<Self> {
        if points.first() == Some(&0) {
            return Err(Error::InvalidGrid("n must be >= 1".into()));
        }
        check_increasing(&points)?;
        Ok(Grid::N(points))
    }

    /// `count` points with equal spacing in `log t` between `start` and `stop`.
    pub fn log_spaced(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && stop > start && count >= 2) {
            return Err(Error::InvalidGrid(format!(
                "log-spaced grid needs 0 < start < stop and count >= 2, got ({start}, {stop}, {count})"
            )));
        }
        let (a, b) = (start.ln(), stop.ln());
        let mut pts: Vec<f64> = (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect();
        pts[0] = start;
        pts[count - 1] = stop;
        Self::t(pts)
    }

    /// `t = 10^lo, ..., 10^hi`.
    pub fn t_decades(lo: i32, hi: i32) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidGrid(format!("empty decade range {lo}..{hi}")));
        }
        Self::t((lo..=hi).map(|d| 10f64.powi(d)).collect())
    }

    /// `n = 10^lo, ..., 10^hi`.
    pub fn n_decades(lo: u32, hi: u32) -> Result<Self> {
        if hi < lo || hi > 19 {
            return Err(Error::InvalidGrid(format!("bad decade range {lo}..{hi}")));
        }
        Self::n((lo..=hi).map(|d| 10u64.pow(d)).collect())
    }

    /// `per_decade` integer points per decade from `10^lo` to `10^hi`,
    /// rounded and deduplicated.
    pub fn n_log_spaced(lo: u32, hi: u32, per_decade: usize) -> Result<Self> {
        if hi <= lo || per_decade == 0 || hi > 19 {
            return Err(Error::InvalidGrid(format!(
                "bad range {lo}..{hi} / {per_decade}"
            )));
        }
        let count = (hi - lo) as usize * per_decade;
        let mut pts: Vec<u64> = (0..=count)
            .map(|i| {
                let e = lo as f64 + i as f64 / per_decade as f64;
                10f64.powf(e).round() as u64
            })
            .collect();
        pts.dedup();
        Self::n(pts)
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::T(p) | Grid::LogT(p) => p.len(),
            Grid::N(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Grid::N(_))
    }

    pub fn abscissae(&self) -> Vec<Abscissa> {
        match self {
            Grid::T(p) => p.iter().map(|&t| Abscissa::T(t)).collect(),
            Grid::LogT(p) => p.iter().map(|&v| Abscissa::LogT(v)).collect(),
            Grid::N(p) => p.iter().map(|&n| Abscissa::N(n)).collect(),
        }
    }

    /// `log` of every point.
    pub fn logs(&self) -> Vec<f64> {
        self.abscissae().iter().map(Abscissa::log).collect()
    }

    /// Last `tail` points.
    pub fn tail(&self, tail: usize) -> Result<Grid> {
        if tail == 0 || tail > self.len() {
            return Err(Error::InvalidGrid(format!(
                "tail {tail} must be in 1..={}",
                self.len()
            )));
        }
        let k = self.len() - tail;
        Ok(match self {
            Grid::T(p) => Grid::T(p[k..].to_vec()),
            Grid::LogT(p) => Grid::LogT(p[k..].to_vec()),
            Grid::N(p) => Grid::N(p[k..].to_vec()),
        })
    }
}
