//! Residual checks for the identities linking `s - τ` to window averages,
//! and the harmonic Toeplitz row-sum bounds.
//!
//! Continuous residuals take `τ` from [`crate::means`] and the window term
//! from [`crate::tauberian`]. The discrete check makes a single pass over the
//! sequence with the same accumulators, so sums up to `1e8` terms stay cheap.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::means::{cont_l1, cont_l1_log, harmonic, DiscreteAcc, MeanKind, MeanPoint};
use crate::model::{Abscissa, FuncSpec, LogPoint, SeqSpec, Value};
use crate::quadrature::QuadConfig;
use crate::sum::CompensatedSum;
use crate::tauberian::window::{
    discrete_window, window_avg_lower, window_avg_lower_log, window_avg_upper,
    window_avg_upper_log, CellStatus, Side, WindowAvg,
};

/// Discrete identities must hold to this multiple of `1 + |lhs|`.
pub const DISCRETE_TOLERANCE: f64 = 1e-12;
/// Continuous residuals are compared against this multiple of the combined
/// quadrature error estimate.
pub const CONTINUOUS_BUDGET_FACTOR: f64 = 10.0;

const ROUNDING: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityStatus {
    Verified,
    Exceeded,
    /// A quadrature did not converge; the residual is reported but not judged.
    Unverified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub abscissa: Abscissa,
    pub lambda: f64,
    pub lhs: Value,
    pub rhs: Value,
    pub residual: f64,
    /// `1 + |lhs|`.
    pub normalizer: f64,
    /// Propagated error estimate of both sides (0 for discrete identities).
    pub error_estimate: f64,
    /// Largest residual accepted as agreement.
    pub budget: f64,
    pub status: IdentityStatus,
}

fn judge(
    abscissa: Abscissa,
    lambda: f64,
    lhs: f64,
    rhs: f64,
    error_estimate: f64,
    budget: f64,
    converged: bool,
) -> IdentityResidual {
    let residual = (lhs - rhs).abs();
    let status = if !converged {
        IdentityStatus::Unverified
    } else if residual <= budget {
        IdentityStatus::Verified
    } else {
        IdentityStatus::Exceeded
    };
    IdentityResidual {
        abscissa,
        lambda,
        lhs: Value::Real(lhs),
        rhs: Value::Real(rhs),
        residual,
        normalizer: 1.0 + lhs.abs(),
        error_estimate,
        budget,
        status,
    }
}

struct Sides {
    s_t: f64,
    tau_t: MeanPoint,
    tau_tl: MeanPoint,
    window: WindowAvg,
}

fn lemma1(abscissa: Abscissa, lambda: f64, upper: bool, sides: Sides) -> IdentityResidual {
    let Sides {
        s_t,
        tau_t,
        tau_tl,
        window,
    } = sides;
    let (tt, ttl) = (tau_t.value.re(), tau_tl.value.re());
    let w = window.value.map_or(f64::NAN, |v| v.re());
    let lhs = s_t - tt;
    let amp = lambda / (lambda - 1.0).abs();
    let rhs = if upper {
        amp * (ttl - tt) - w
    } else {
        amp * (tt - ttl) + w
    };
    let propagated =
        tau_t.quad_error + amp * (tau_tl.quad_error + tau_t.quad_error) + window.quad_error;
    let floor = ROUNDING * (s_t.abs() + tt.abs() + amp * (ttl.abs() + tt.abs()) + w.abs());
    let err = propagated + floor;
    let converged = tau_t.converged && tau_tl.converged && window.status == CellStatus::Ok;
    judge(
        abscissa,
        lambda,
        lhs,
        rhs,
        err,
        CONTINUOUS_BUDGET_FACTOR * err,
        converged,
    )
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(domain(format!("identity needs finite t > 1, got {t}")));
    }
    Ok(())
}

/// `s(t) - τ(t)` against `(λ/(λ-1))(τ(t^λ) - τ(t)) - W⁺(t, λ)` for `λ > 1`.
pub fn lemma1_upper_residual(
    f: &FuncSpec,
    t: f64,
    lambda: f64,
    cfg: &QuadConfig,
) -> Result<IdentityResidual> {
    check_t(t)?;
    let window = window_avg_upper(f, t, lambda, cfg)?;
    let sides = Sides {
        s_t: f.eval(t)?,
        tau_t: cont_l1(f, t, cfg)?,
        tau_tl: cont_l1_log(f, lambda * t.ln(), cfg)?,
        window,
    };
    Ok(lemma1(Abscissa::T(t), lambda, true, sides))
}

/// `s(t) - τ(t)` against `(λ/(1-λ))(τ(t) - τ(t^λ)) + W⁻(t, λ)` for `0 < λ < 1`.
pub fn lemma1_lower_residual(
    f: &FuncSpec,
    t: f64,
    lambda: f64,
    cfg: &QuadConfig,
) -> Result<IdentityResidual> {
    check_t(t)?;
    let window = window_avg_lower(f, t, lambda, cfg)?;
    let sides = Sides {
        s_t: f.eval(t)?,
        tau_t: cont_l1(f, t, cfg)?,
        tau_tl: cont_l1_log(f, lambda * t.ln(), cfg)?,
        window,
    };
    Ok(lemma1(Abscissa::T(t), lambda, false, sides))
}

/// [`lemma1_upper_residual`] and [`lemma1_lower_residual`] at `t = e^{log_t}`,
/// choosing the side from `λ`.
pub fn lemma1_residual_log(
    f: &FuncSpec,
    log_t: f64,
    lambda: f64,
    cfg: &QuadConfig,
) -> Result<IdentityResidual> {
    if !(log_t > 0.0) {
        return Err(domain(format!("identity needs log t > 0, got {log_t}")));
    }
    let upper = lambda > 1.0;
    let window = if upper {
        window_avg_upper_log(f, log_t, lambda, cfg)?
    } else {
        window_avg_lower_log(f, log_t, lambda, cfg)?
    };
    let sides = Sides {
        s_t: f.eval_point(&LogPoint::from_log(log_t))?,
        tau_t: cont_l1_log(f, log_t, cfg)?,
        tau_tl: cont_l1_log(f, lambda * log_t, cfg)?,
        window,
    };
    Ok(lemma1(Abscissa::LogT(log_t), lambda, upper, sides))
}

fn lemma2(s: &SeqSpec, n: u64, lambda: f64, upper: bool) -> Result<IdentityResidual> {
    let side = if upper { Side::Upper } else { Side::Lower };
    let (lo, hi) = discrete_window(n, lambda, side)?;
    if lo == hi {
        return Err(domain(format!(
            "window is empty: [n^λ] = n for n = {n}, λ = {lambda}"
        )));
    }
    let end = if upper { hi } else { lo };
    // One pass over k <= max(n, K) feeds the same accumulator as `disc_l1`
    // and the same window sum and normalizer as `disc_window_with`.
    let sn = s.eval(n)?;
    let mut acc = DiscreteAcc::default();
    let mut window = CompensatedSum::new();
    let mut d = CompensatedSum::new();
    let (mut tau_n, mut tau_end, mut ell_end) = (0.0, 0.0, 0.0);
    for k in 1..=hi {
        let sk = s.eval(k)?;
        acc.push(sk);
        if k > lo {
            window.add((sk - sn) / k as f64);
            d.add(1.0 / k as f64);
        }
        if k == n {
            tau_n = acc.mean(MeanKind::L1);
        }
        if k == end {
            tau_end = acc.mean(MeanKind::L1);
            ell_end = acc.harmonic();
        }
    }
    let d = d.value();
    let w = match side {
        Side::Upper => window.value(),
        Side::Lower => -window.value(),
    } / d;
    let lhs = sn - tau_n;
    let rhs = if upper {
        ell_end / d * (tau_end - tau_n) - w
    } else {
        ell_end / d * (tau_n - tau_end) + w
    };
    let normalizer = 1.0 + lhs.abs();
    Ok(judge(
        Abscissa::N(n),
        lambda,
        lhs,
        rhs,
        0.0,
        DISCRETE_TOLERANCE * normalizer,
        true,
    ))
}

/// `s_n - τ_n` against `(ℓ_K/(ℓ_K - ℓ_n))(τ_K - τ_n) - (1/(ℓ_K - ℓ_n)) Σ_{n<k<=K} (s_k - s_n)/k`
/// with `K = [n^λ] > n`.
pub fn lemma2_upper_residual(s: &SeqSpec, n: u64, lambda: f64) -> Result<IdentityResidual> {
    lemma2(s, n, lambda, true)
}

/// `s_n - τ_n` against `(ℓ_K/(ℓ_n - ℓ_K))(τ_n - τ_K) + (1/(ℓ_n - ℓ_K)) Σ_{K<k<=n} (s_n - s_k)/k`
/// with `K = [n^λ] < n`.
pub fn lemma2_lower_residual(s: &SeqSpec, n: u64, lambda: f64) -> Result<IdentityResidual> {
    lemma2(s, n, lambda, false)
}

/// `((ℓ_m - 1)/log m, ℓ_{m-1}/log m)`, bounds on the row sum of the
/// harmonic Toeplitz matrix.
pub fn toeplitz_bounds(m: u64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(domain(format!("toeplitz bounds need m >= 2, got {m}")));
    }
    let log_m = (m as f64).ln();
    let ell_prev = harmonic(m - 1);
    let ell_m = ell_prev + 1.0 / m as f64;
    Ok(((ell_m - 1.0) / log_m, ell_prev / log_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinSeq;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn lemma1_log_u() {
        let f = FuncSpec::expr(1.0, "log(u)").unwrap();
        let r = lemma1_upper_residual(&f, 2.0, 2.0, &cfg()).unwrap();
        assert!((r.lhs.re() - 2f64.ln() / 2.0).abs() < 1e-12);
        assert!((r.rhs.re() - 2f64.ln() / 2.0).abs() < 1e-12);
        assert_eq!(r.status, IdentityStatus::Verified);
        let r = lemma1_lower_residual(&f, 4.0, 0.5, &cfg()).unwrap();
        assert!((r.lhs.re() - 4f64.ln() / 2.0).abs() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn lemma1_constant() {
        let f = FuncSpec::constant(1.0, 3.0);
        for lam in [0.5, 1.5] {
            let r = lemma1_residual_log(&f, 5.0, lam, &cfg()).unwrap();
            assert!(r.lhs.re().abs() < 1e-14 && r.rhs.re().abs() < 1e-13);
        }
    }

    #[test]
    fn lemma2_examples() {
        let k = SeqSpec::parse("k").unwrap();
        let r = lemma2_upper_residual(&k, 3, 1.5).unwrap();
        assert!(r.residual <= 1e-13, "{r:?}");
        // brute-force lhs: s_3 - τ_3 = 3 - 3/ℓ_3
        assert!((r.lhs.re() - (3.0 - 3.0 / (11.0 / 6.0))).abs() < 1e-14);
        let alt = SeqSpec::Builtin(BuiltinSeq::Alt);
        let r = lemma2_upper_residual(&alt, 10, 1.2).unwrap();
        assert!(r.residual <= 1e-13);
        let r = lemma2_lower_residual(&alt, 10, 0.5).unwrap();
        assert!(r.residual <= 1e-13);
        let r = lemma2_lower_residual(&k, 9, 0.7).unwrap();
        assert!(r.residual <= 1e-13);
        let c = SeqSpec::constant(4.0);
        let r = lemma2_upper_residual(&c, 50, 1.3).unwrap();
        assert_eq!(r.lhs.re(), 0.0);
        assert!(r.rhs.re().abs() < 1e-13);
        assert!(lemma2_upper_residual(&alt, 2, 1.01).is_err());
    }

    #[test]
    fn lemma2_matches_public_paths() {
        use crate::means::disc_l1;
        use crate::tauberian::window::{disc_window_with, discrete_window_end, DiscreteNorm};
        let s = SeqSpec::parse("sin(k) + (-1)^k * log(k)").unwrap();
        for (n, lam) in [(40, 1.3), (500, 0.8), (77, 2.0)] {
            let side = if lam > 1.0 { Side::Upper } else { Side::Lower };
            let r = lemma2(&s, n, lam, lam > 1.0).unwrap();
            let tau_n = disc_l1(&s, n).unwrap().value.re();
            assert_eq!(r.lhs.re(), s.eval(n).unwrap() - tau_n);
            let end = discrete_window_end(n, lam).unwrap();
            let tau_end = disc_l1(&s, end).unwrap().value.re();
            let w = disc_window_with(&s, n, lam, side, DiscreteNorm::HarmonicIncrement)
                .unwrap()
                .value
                .unwrap()
                .re();
            let d = (harmonic(end) - harmonic(n)).abs();
            let rhs = match side {
                Side::Upper => harmonic(end) / d * (tau_end - tau_n) - w,
                Side::Lower => harmonic(end) / d * (tau_n - tau_end) + w,
            };
            assert!(
                (r.rhs.re() - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "{n} {lam}"
            );
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn toeplitz_examples() {
        let (lo, hi) = toeplitz_bounds(2).unwrap();
        assert!((lo - 0.5 / 2f64.ln()).abs() < 1e-15);
        assert!((hi - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((lo - 0.7213).abs() < 1e-4 && (hi - 1.4427).abs() < 1e-4);
        let (lo, hi) = toeplitz_bounds(1_000_000).unwrap();
        assert!(lo < hi && (lo - 1.0).abs() < 0.08 && (hi - 1.0).abs() < 0.08);
        assert!(toeplitz_bounds(1).is_err());
    }
}
