//! Special functions used by the closed-form catalog segments.

use std::f64::consts::FRAC_PI_2;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `log1p(x) / x`, continuous at `x = 0` where it equals 1.
pub fn log1p_ratio(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        // 1 - x/2 + x^2/3 - x^3/4
        1.0 - x * (0.5 - x * (1.0 / 3.0 - x * 0.25))
    } else {
        x.ln_1p() / x
    }
}

/// Sine and cosine integrals `(Si(x), Ci(x))` for `x > 0`.
///
/// Power series below `x = 2`, continued fraction for `E1(ix)` (modified
/// Lentz) above.
pub fn sici(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "sici requires x > 0");
    if x < 2.0 {
        // p = x^(2k+1)/(2k+1)!, q = x^(2k)/(2k)!
        let mut p = x;
        let mut q = 1.0;
        let mut si = 0.0;
        let mut ci = 0.0;
        let mut sign = 1.0;
        for k in 0..40u32 {
            let n = (2 * k + 1) as f64;
            let s_term = p / n;
            si += sign * s_term;
            if k > 0 {
                ci += sign * q / (n - 1.0);
            }
            q = p * x / (n + 1.0);
            p = q * x / (n + 2.0);
            sign = -sign;
            if k > 0 && s_term < 1e-17 * si.abs() {
                break;
            }
        }
        (si, EULER_GAMMA + x.ln() + ci)
    } else {
        // complex arithmetic on (re, im) pairs
        let (mut b_re, b_im) = (1.0, x);
        let (mut c_re, mut c_im) = (1.0 / f64::MIN_POSITIVE, 0.0);
        let (mut d_re, mut d_im) = cinv(b_re, b_im);
        let (mut h_re, mut h_im) = (d_re, d_im);
        for i in 2..500u32 {
            let a = -((i - 1) as f64).powi(2);
            b_re += 2.0;
            let (dr, di) = cinv(a * d_re + b_re, a * d_im + b_im);
            d_re = dr;
            d_im = di;
            let (qr, qi) = cscale_inv(a, c_re, c_im);
            c_re = b_re + qr;
            c_im = b_im + qi;
            let (del_re, del_im) = cmul(c_re, c_im, d_re, d_im);
            let (nh_re, nh_im) = cmul(h_re, h_im, del_re, del_im);
            h_re = nh_re;
            h_im = nh_im;
            if (del_re - 1.0).abs() + del_im.abs() < 1e-16 {
                break;
            }
        }
        let (s, c) = x.sin_cos();
        let (r_re, r_im) = cmul(c, -s, h_re, h_im);
        (FRAC_PI_2 + r_im, -r_re)
    }
}

#[inline]
fn cmul(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    (a * c - b * d, a * d + b * c)
}

#[inline]
fn cinv(a: f64, b: f64) -> (f64, f64) {
    let n = a.hypot(b);
    let (ar, br) = (a / n, b / n);
    (ar / n, -br / n)
}

/// `a / (c_re + i c_im)` for real `a`.
#[inline]
fn cscale_inv(a: f64, c_re: f64, c_im: f64) -> (f64, f64) {
    let (ir, ii) = cinv(c_re, c_im);
    (a * ir, a * ii)
}

/// Sine integral.
pub fn si(x: f64) -> f64 {
    sici(x).0
}

/// Cosine integral.
pub fn ci(x: f64) -> f64 {
    sici(x).1
}
