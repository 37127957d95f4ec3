//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use logtauber_core::catalog::{
    catalog_get, thm3_block_bound, thm3_func, thm3_sigma_spike, thm3_tau_closed_form,
};
use logtauber_core::identities::{
    lemma1_lower_residual, lemma1_upper_residual, lemma2_lower_residual, lemma2_upper_residual,
    toeplitz_bounds, IdentityStatus,
};
use logtauber_core::means::{cont_l1, cont_l1_log, harmonic, mean_series, MeanKind};
use logtauber_core::model::{parse_expr, Abscissa, EvalErrorKind, Grid, SeqSpec, Spec, Var};
use logtauber_core::par::Execution;
use logtauber_core::quadrature::{adaptive_simpson, QuadConfig};
use logtauber_core::tauberian::{
    condition_profile, default_n_grid, default_t_grid, window_avg_upper_log, ProfileConfig, Side,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    failures: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            failures: Vec::new(),
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn run(id: u32, name: &str, budget: Option<Duration>, body: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    body(&mut out);
    let elapsed = start.elapsed();
    if let Some(limit) = budget {
        out.check(elapsed < limit, || {
            format!("took {elapsed:.2?}, limit {limit:?}")
        });
    }
    let pass = out.failures.is_empty();
    println!(
        "criterion {id:>2} {name:<34} {} ({elapsed:.2?}{}{})",
        if pass { "PASS" } else { "FAIL" },
        if out.detail.is_empty() { "" } else { "; " },
        out.detail
    );
    for f in out.failures.iter().take(10) {
        println!("    {f}");
    }
    if out.failures.len() > 10 {
        println!("    ... {} more", out.failures.len() - 10);
    }
    pass
}

const ATOMS: [&str; 10] = [
    "1",
    "(-1)^k",
    "log(k)",
    "sin(k)",
    "cos(k)/k",
    "k^0.5",
    "sin(log(k))",
    "(-1)^k*k",
    "floor(k/3)",
    "1/k",
];

fn random_seq(rng: &mut ChaCha8Rng) -> (String, SeqSpec) {
    let terms = rng.gen_range(1..=3);
    let text = (0..terms)
        .map(|_| {
            let c: f64 = rng.gen_range(-3.0..3.0);
            format!("{c:?}*{}", ATOMS[rng.gen_range(0..ATOMS.len())])
        })
        .collect::<Vec<_>>()
        .join(" + ");
    let s = SeqSpec::parse(&text).expect("generated expression parses");
    (text, s)
}

fn lemma2_random(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 200 {
        let (text, s) = random_seq(&mut rng);
        // log-uniform n in [2, 1e4]
        let n = 10f64.powf(rng.gen_range(2f64.log10()..4.0)).round() as u64;
        let upper = rng.gen_bool(0.5);
        let lambda = if upper {
            rng.gen_range(1.05..=2.0)
        } else {
            rng.gen_range(0.5..=0.95)
        };
        let r = if upper {
            lemma2_upper_residual(&s, n, lambda)
        } else {
            lemma2_lower_residual(&s, n, lambda)
        };
        let Ok(r) = r else {
            // empty window, e.g. [n^λ] = n for small n; draw again
            continue;
        };
        // brute-force left side
        let mut ell = 0.0;
        let mut acc = 0.0;
        for k in 1..=n {
            ell += 1.0 / k as f64;
            acc += s.eval(k).unwrap() / k as f64;
        }
        let lhs = s.eval(n).unwrap() - acc / ell;
        let tol = 1e-12 * (1.0 + r.lhs.abs());
        worst = worst.max(r.residual / (1.0 + r.lhs.abs()));
        out.check(r.residual <= tol, || {
            format!(
                "{text}: n={n} λ={lambda}: residual {:.3e} > {tol:.3e}",
                r.residual
            )
        });
        out.check(
            (lhs - r.lhs.re()).abs() <= 1e-10 * (1.0 + lhs.abs()),
            || format!("{text}: n={n}: lhs {} vs brute force {lhs}", r.lhs.re()),
        );
        checked += 1;
    }
    out.detail = format!("200 triples, worst residual/(1+|lhs|) {worst:.2e}");
}

fn lemma1_catalog(out: &mut Outcome) {
    let cfg = QuadConfig::default();
    let mut cells = 0;
    let mut worst = 0.0f64;
    for name in ["const", "log_u", "sin_loglog", "c1_conv", "thm3"] {
        let f = catalog_get(name).unwrap().func.unwrap();
        for d in 1..=6 {
            let t = 10f64.powi(d);
            for lambda in [1.1, 1.5, 2.0, 0.5, 0.9] {
                let r = if lambda > 1.0 {
                    lemma1_upper_residual(&f, t, lambda, &cfg)
                } else {
                    lemma1_lower_residual(&f, t, lambda, &cfg)
                };
                let r = match r {
                    Ok(r) => r,
                    Err(e) => {
                        out.failures.push(format!("{name} t={t} λ={lambda}: {e}"));
                        continue;
                    }
                };
                cells += 1;
                worst = worst.max(r.residual);
                out.check(r.status == IdentityStatus::Verified, || {
                    format!(
                        "{name} t={t} λ={lambda}: {:?}, residual {:.3e}, budget {:.3e}",
                        r.status, r.residual, r.budget
                    )
                });
                out.check(r.residual <= 1e-6, || {
                    format!(
                        "{name} t={t} λ={lambda}: residual {:.3e} > 1e-6",
                        r.residual
                    )
                });
            }
        }
    }
    out.detail = format!("{cells} cells, worst residual {worst:.2e}");
}

fn thm3_counterexample(out: &mut Outcome) {
    for m in 2..=40u32 {
        let bound = thm3_block_bound(m);
        let lo = 2f64.powi(m as i32 - 1);
        let hi = 2f64.powi(m as i32);
        // block start, inside the plateau that starts there, a spread of
        // interior points, and the last representable point of the block
        let width = (-lo).exp().ln_1p();
        let mut probes = vec![lo, lo + width / 2.0, lo + width, hi.next_down()];
        probes.extend((1..16).map(|i| lo + (hi - lo) * i as f64 / 16.0));
        for v in probes {
            let tau = thm3_tau_closed_form(v);
            out.check((0.0..=bound).contains(&tau), || {
                format!("m={m} log t={v}: τ = {tau:e} outside [0, {bound:e}]")
            });
        }
    }
    let f = thm3_func();
    let cfg = QuadConfig::default();
    let mut worst = 0.0f64;
    let probes = [
        1.5, 2.0, 2.05, 2.1, 3.0, 4.0, 4.01, 4.5, 8.0, 10.0, 16.0, 30.0, 64.0, 100.0, 128.0, 200.0,
        256.0, 400.0, 512.0,
    ];
    for v in probes {
        let cf = thm3_tau_closed_form(v);
        let q = cont_l1_log(&f, v, &cfg).unwrap();
        let oracle = thm3_tau_by_simpson(v);
        for (what, got, ok) in [
            ("library", q.value.re(), q.converged),
            ("shifted simpson", oracle, true),
        ] {
            let diff = (got - cf).abs();
            let rel = if cf == 0.0 { diff } else { diff / cf.abs() };
            worst = worst.max(rel);
            out.check(ok && diff <= 1e-8 * cf.abs(), || {
                format!("log t={v}: {what} τ {got} vs closed form {cf} (rel {rel:.2e})")
            });
        }
    }
    for m in 1..=40 {
        let spike = thm3_sigma_spike(m);
        out.check(spike == m as f64, || format!("sigma_spike({m}) = {spike}"));
    }
    out.detail = format!("bound m=2..40, worst quadrature rel {worst:.1e}, spikes m=1..40");
}

/// `τ` of the plateau function by plain quadrature. Plateau `k` contributes
/// `∫ h/u du` over `u = e^{2^k} + y`, `0 <= y <= 1`, which is
/// `k ∫ dy / (1 + y e^{-2^k})`: no closed form and no log-domain bookkeeping.
fn thm3_tau_by_simpson(log_t: f64) -> f64 {
    let cfg = QuadConfig::default();
    let mut mass = 0.0;
    let mut k = 1;
    while 2f64.powi(k) <= log_t {
        let base = 2f64.powi(k);
        // covered part of the plateau, in units of y
        let y_max = (base.exp() * (log_t - base).exp_m1()).min(1.0);
        let scale = (-base).exp();
        let r =
            adaptive_simpson(|y| Ok::<_, ()>(1.0 / (1.0 + y * scale)), 0.0, y_max, &cfg).unwrap();
        mass += k as f64 * r.value;
        k += 1;
    }
    mass / log_t
}

fn inclusion(out: &mut Outcome) {
    let f = catalog_get("c1_conv(1)").unwrap().func.unwrap();
    let cfg = QuadConfig::default();
    let gaps: Vec<f64> = (2..=8)
        .map(|d| (cont_l1(&f, 10f64.powi(d), &cfg).unwrap().value.re() - 1.0).abs())
        .collect();
    let last = gaps[gaps.len() - 1];
    out.check(last <= 0.1, || format!("|τ(1e8) - 1| = {last}"));
    for (i, w) in gaps.windows(2).enumerate() {
        out.check(w[1] <= 1.1 * w[0], || {
            format!(
                "gap grows from {:.3e} at 1e{} to {:.3e} at 1e{}",
                w[0],
                i + 2,
                w[1],
                i + 3
            )
        });
    }
    out.detail = format!("|τ(1e8) - 1| = {last:.2e}");
}

fn alt_k_separation(out: &mut Outcome) {
    let s = Spec::Seq(catalog_get("alt_k").unwrap().seq.unwrap());
    let cfg = QuadConfig::default();
    // every decade, its odd neighbors, and a dense run at the start
    let mut ns: Vec<u64> = (1..=200).collect();
    for d in 3..=6 {
        let n = 10u64.pow(d);
        ns.extend([n - 1, n, n + 1]);
    }
    let grid = Grid::n(ns).unwrap();
    let tau = mean_series(&s, &grid, MeanKind::L1, &cfg, Execution::Sequential).unwrap();
    let mut worst = 0.0f64;
    for p in &tau.points {
        let Abscissa::N(n) = p.abscissa else {
            unreachable!()
        };
        let scaled = p.value.abs() * harmonic(n);
        worst = worst.max(scaled);
        out.check(scaled <= 1.0 + 1e-9, || {
            format!("n={n}: |τ_n| ℓ_n = {scaled}")
        });
    }
    let sigma = mean_series(&s, &grid, MeanKind::C1, &cfg, Execution::Sequential).unwrap();
    for p in &sigma.points {
        let Abscissa::N(n) = p.abscissa else {
            unreachable!()
        };
        let want = if n % 2 == 0 {
            0.5
        } else {
            let m = (n - 1) / 2;
            -((m + 1) as f64) / n as f64
        };
        out.check(p.value.re() == want, || {
            format!("σ_{n} = {} != {want}", p.value.re())
        });
    }
    out.detail = format!("max |τ_n| ℓ_n = {worst:.12}");
}

fn window_closed_form(out: &mut Outcome) {
    let f = catalog_get("log_u").unwrap().func.unwrap();
    let cfg = QuadConfig::default();
    let mut worst = 0.0f64;
    for v in [2.0, 10.0, 50.0] {
        for lambda in [1.1, 1.5, 2.0] {
            let w = window_avg_upper_log(&f, v, lambda, &cfg).unwrap();
            let got = w.value.map_or(f64::NAN, |x| x.re());
            let want = (lambda - 1.0) * v / 2.0;
            worst = worst.max((got - want).abs());
            out.check((got - want).abs() <= 1e-8, || {
                format!("v={v} λ={lambda}: {got} vs {want}")
            });
        }
    }
    out.detail = format!("worst error {worst:.1e}");
}

fn slow_oscillation(out: &mut Outcome) {
    let cfg = ProfileConfig {
        exec: Execution::Sequential,
        ..ProfileConfig::default()
    };
    let f = Spec::Func(catalog_get("sin_loglog").unwrap().func.unwrap());
    let report = condition_profile(&f, &default_t_grid(), &cfg).unwrap();
    let mut cells = 0;
    for (row, &lambda) in report.so_modulus.iter().zip(&report.lambda_upper) {
        for (cell, x) in row.iter().zip(&report.abscissae) {
            let Some(m) = *cell else {
                out.failures
                    .push(format!("sin_loglog {x:?} λ={lambda}: no modulus"));
                continue;
            };
            cells += 1;
            out.check(m <= lambda.ln() + 1e-9, || {
                format!("sin_loglog {x:?} λ={lambda}: {m} > log λ")
            });
        }
    }
    let a = Spec::Seq(catalog_get("alt").unwrap().seq.unwrap());
    let report = condition_profile(&a, &default_n_grid(), &cfg).unwrap();
    let mut windows = 0;
    for (row, &lambda) in report.so_modulus.iter().zip(&report.lambda_upper) {
        for (cell, x) in row.iter().zip(&report.abscissae) {
            if let Some(m) = *cell {
                windows += 1;
                out.check(m == 2.0, || format!("alt {x:?} λ={lambda}: modulus {m}"));
            }
        }
    }
    out.check(windows > 0, || "alt: every window empty".into());
    out.detail = format!("{cells} sin_loglog cells, {windows} non-empty alt windows");
}

fn toeplitz(out: &mut Outcome) {
    for m in [2, 10, 1_000, 1_000_000] {
        let (lo, hi) = toeplitz_bounds(m).unwrap();
        out.check(lo < hi, || format!("m={m}: lower {lo} >= upper {hi}"));
        if m == 1_000_000 {
            out.check((hi - 1.0).abs() <= 0.05 && (lo - 1.0).abs() <= 0.05, || {
                format!("m=1e6: bounds ({lo}, {hi}) not within 0.05 of 1")
            });
            out.detail = format!("m=1e6: ({lo:.5}, {hi:.5})");
        }
    }
}

fn tail_sup(f: &Spec, stop: f64) -> f64 {
    let cfg = ProfileConfig {
        lambda_upper: vec![1.1],
        lambda_lower: vec![],
        tail: Some(4),
        exec: Execution::Sequential,
        ..ProfileConfig::default()
    };
    let grid = Grid::log_spaced(stop / 10.0, stop, 9).unwrap();
    let report = condition_profile(f, &grid, &cfg).unwrap();
    let row = &report.verdict.upper[0];
    assert_eq!((row.lambda, row.side), (1.1, Side::Upper));
    row.tail_sup_abs.expect("tail cells are usable")
}

fn necessity_trend(out: &mut Outcome) {
    let f = Spec::Func(catalog_get("c1_conv(1)").unwrap().func.unwrap());
    let early = tail_sup(&f, 1e3);
    let late = tail_sup(&f, 1e7);
    out.check(late * 2.0 <= early, || {
        format!("tail sup {early:.3e} at 1e3, {late:.3e} at 1e7")
    });
    out.detail = format!("{early:.2e} -> {late:.2e}");
}

/// Variable and text; every entry must survive print/parse unchanged.
const GRAMMAR_CORPUS: [(Var, &str); 30] = [
    (Var::U, "3"),
    (Var::U, "u"),
    (Var::K, "(-1)^k * k"),
    (Var::U, "sin(log(log(u)))"),
    (Var::U, "1 + 2 * 3"),
    (Var::U, "(1 + 2) * 3"),
    (Var::U, "2^3^2"),
    (Var::U, "(2^3)^2"),
    (Var::U, "-u^2"),
    (Var::U, "(-u)^2"),
    (Var::U, "--u"),
    (Var::U, "u - (1 - u)"),
    (Var::U, "u / (2 / u)"),
    (Var::U, "u / 2 / u"),
    (Var::X, "sin(x)/(x*log(x))"),
    (Var::U, "exp(-u) * cos(u)"),
    (Var::U, "pow(u, 0.5) + abs(u - 3)"),
    (Var::K, "floor(k / 2) * 2 - k"),
    (Var::U, "log1p(1/u)"),
    (Var::U, "e^pi - pi^e"),
    (Var::U, "1.5e-3 * u"),
    (Var::U, "2.5E+2 - u"),
    (Var::U, ".5 + u"),
    (Var::K, "k^-1"),
    (Var::K, "2^-k^2"),
    (Var::U, "-(u + 1)"),
    (Var::U, "u*-1"),
    (Var::X, "pow(x, pow(x, 2))"),
    (Var::U, "  ( ( u ) )  "),
    (Var::K, "cos(pi * k) / (1 + log(k))^2"),
];

fn parser(out: &mut Outcome) {
    for (var, text) in GRAMMAR_CORPUS {
        let e = match parse_expr(text, var) {
            Ok(e) => e,
            Err(err) => {
                out.failures.push(format!("{text:?}: {err}"));
                continue;
            }
        };
        let printed = e.to_string();
        match parse_expr(&printed, var) {
            Ok(back) => out.check(back == e, || {
                format!("{text:?} printed as {printed:?} parses differently")
            }),
            Err(err) => out
                .failures
                .push(format!("{text:?} printed as {printed:?}: {err}")),
        }
        let probe = 2.75;
        let (a, b) = (
            e.eval(probe),
            parse_expr(&printed, var).map(|b| b.eval(probe)),
        );
        if let (Ok(a), Ok(Ok(b))) = (a, b) {
            out.check(a.to_bits() == b.to_bits(), || {
                format!("{text:?}: {a} vs {b} after round trip")
            });
        }
    }
    let cases: [(&str, Var, f64, usize, fn(&EvalErrorKind) -> bool); 3] = [
        ("1 + log(u - 2)", Var::U, 1.0, 4, |k| {
            matches!(k, EvalErrorKind::LogNonPositive(_))
        }),
        ("(-1)^k * k", Var::K, 2.5, 4, |k| {
            matches!(k, EvalErrorKind::NegativeBaseFractionalExponent { .. })
        }),
        ("exp(u) * 2", Var::U, 800.0, 0, |k| {
            matches!(k, EvalErrorKind::NonFinite)
        }),
    ];
    for (text, var, at, offset, kind_ok) in cases {
        match parse_expr(text, var).unwrap().eval(at) {
            Ok(v) => out
                .failures
                .push(format!("{text:?} at {at}: expected error, got {v}")),
            Err(err) => {
                out.check(kind_ok(&err.kind), || {
                    format!("{text:?} at {at}: wrong kind {:?}", err.kind)
                });
                out.check(err.offset == offset, || {
                    format!("{text:?} at {at}: offset {} != {offset}", err.offset)
                });
            }
        }
    }
    out.detail = format!("{} fixtures, 3 domain errors", GRAMMAR_CORPUS.len());
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        run(1, "discrete identity, random", Some(secs(5)), lemma2_random),
        run(
            2,
            "continuous identity, catalog",
            Some(secs(30)),
            lemma1_catalog,
        ),
        run(3, "plateau counterexample", None, thm3_counterexample),
        run(4, "inclusion, c1_conv(1)", None, inclusion),
        run(5, "alt_k separation", Some(secs(10)), alt_k_separation),
        run(6, "window closed form, log_u", None, window_closed_form),
        run(7, "slow oscillation modulus", None, slow_oscillation),
        run(8, "toeplitz bounds", None, toeplitz),
        run(9, "necessity trend, c1_conv", None, necessity_trend),
        run(10, "expression grammar", None, parser),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
