//! Finite-scale estimators for Tauberian window conditions.

pub mod profile;
pub mod window;

use serde::Serialize;

pub use profile::{
    condition_profile, default_lower_lambdas, default_n_grid, default_t_grid, default_tail,
    LambdaSummary, ProfileConfig, TauberianReport, Trend, Verdict, DEFAULT_UPPER_LAMBDAS,
};
pub use window::{
    disc_window_lower, disc_window_upper, disc_window_with, discrete_window_end,
    slow_decrease_margin, slow_osc_modulus, window_avg, window_avg_lower, window_avg_lower_log,
    window_avg_upper, window_avg_upper_log, within_ratio, CellStatus, DiscreteNorm, Side,
    WindowAvg,
};

use crate::error::{domain, Result};
use crate::model::FuncSpec;

/// Sampled check of `x log x f(x) >= -C` and `x log x |f(x)| <= C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrandCheck {
    pub x_grid: Vec<f64>,
    pub x0: f64,
    pub c: f64,
    /// `min x log x f(x)` over the grid.
    pub min_one_sided: f64,
    /// `max x log x |f(x)|` over the grid.
    pub max_two_sided: f64,
    pub one_sided_holds: bool,
    pub two_sided_holds: bool,
}

pub fn integrand_conditions(
    f: &FuncSpec,
    x0: f64,
    x_grid: &[f64],
    c: f64,
) -> Result<IntegrandCheck> {
    let floor = x0.max(1.0);
    if x_grid.is_empty() {
        return Err(domain("integrand check needs at least one sample"));
    }
    if let Some(x) = x_grid.iter().find(|&&x| !(x > floor) || !x.is_finite()) {
        return Err(domain(format!(
            "sample x = {x} lies outside ({floor}, inf)"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &x in x_grid {
        let g = x * x.ln() * f.eval(x)?;
        lo = lo.min(g);
        hi = hi.max(g.abs());
    }
    Ok(IntegrandCheck {
        x_grid: x_grid.to_vec(),
        x0,
        c,
        min_one_sided: lo,
        max_two_sided: hi,
        one_sided_holds: lo >= -c,
        two_sided_holds: hi <= c,
    })
}
