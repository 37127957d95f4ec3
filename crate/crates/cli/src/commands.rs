use std::path::Path;

use anyhow::{bail, Context, Result};
use logtauber_core::catalog::{
    catalog_list, thm3_block_bound, thm3_sigma_spike, thm3_tau_closed_form, Limit,
};
use logtauber_core::identities::{
    lemma1_lower_residual, lemma1_residual_log, lemma1_upper_residual, lemma2_lower_residual,
    lemma2_upper_residual, IdentityResidual, IdentityStatus,
};
use logtauber_core::means::{mean_series, MeanKind, MeanSeries};
use logtauber_core::model::{Abscissa, Grid, SeqSpec, Spec};
use logtauber_core::par::{map_ordered, try_map_ordered, Execution};
use logtauber_core::tauberian::{
    condition_profile, default_lower_lambdas, default_n_grid, default_t_grid, discrete_window_end,
    ProfileConfig, TauberianReport, DEFAULT_UPPER_LAMBDAS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{grid_or, plateau_logs, resolve, Format, Input, Resolved, RunConfig};
use crate::output::{abscissa, emit, num, opt, Table};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Config = 1,
    SoftFailure = 2,
    IdentityExceeded = 3,
}

pub const DEFAULT_IDENTITY_LAMBDAS: [f64; 5] = [1.1, 1.5, 2.0, 0.5, 0.9];
pub const DEFAULT_M_MAX: u32 = 20;
/// `2^m` stays finite up to here.
const MAX_M: u32 = 1000;
const RANDOM_MAX_N: f64 = 1e4;

fn format(cfg: &RunConfig) -> Format {
    cfg.format.unwrap_or_default()
}

fn input(cfg: &RunConfig) -> Result<&Input> {
    cfg.input
        .as_ref()
        .context("no input given (use --catalog, --expr, --seq, --integrand or a config file)")
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn axis_note(grid: &Grid) -> Option<&'static str> {
    matches!(grid, Grid::LogT(_)).then_some("abscissa is log t")
}

// ---------------------------------------------------------------------------
// means

#[derive(Serialize)]
struct MeanRow {
    abscissa: Abscissa,
    sigma: Option<f64>,
    tau: Option<f64>,
    tau2: Option<f64>,
    quad_err: f64,
    converged: bool,
}

#[derive(Serialize)]
struct MeansReport<'a> {
    input: &'a str,
    rows: Vec<MeanRow>,
    fingerprints: Vec<(MeanKind, String)>,
}

pub fn means(cfg: &RunConfig) -> Result<Status> {
    let r = resolve(input(cfg)?, cfg.grid.as_ref(), &cfg.quad)?;
    let grid = grid_or(cfg.grid.as_ref(), &r, default_mean_grid)?;
    let kinds = match &cfg.means.kinds {
        Some(k) if k.is_empty() => bail!("no mean kinds selected"),
        Some(k) => k.clone(),
        // σ needs t itself, which the plateau axis does not have
        None if r.log_axis => vec![MeanKind::L1, MeanKind::L2],
        None => MeanKind::ALL.to_vec(),
    };
    let series = kinds
        .iter()
        .map(|&k| mean_series(&r.spec, &grid, k, &cfg.quad, Execution::Parallel))
        .collect::<logtauber_core::Result<Vec<MeanSeries>>>()?;
    let pick =
        |kind: MeanKind, i: usize| series.iter().find(|s| s.kind == kind).map(|s| &s.points[i]);
    let rows: Vec<MeanRow> = grid
        .abscissae()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let pts: Vec<_> = series.iter().map(|s| &s.points[i]).collect();
            MeanRow {
                abscissa: x,
                sigma: pick(MeanKind::C1, i).map(|p| p.value.re()),
                tau: pick(MeanKind::L1, i).map(|p| p.value.re()),
                tau2: pick(MeanKind::L2, i).map(|p| p.value.re()),
                quad_err: pts.iter().map(|p| p.quad_error).sum(),
                converged: pts.iter().all(|p| p.converged),
            }
        })
        .collect();
    let soft = rows.iter().filter(|r| !r.converged).count();
    let bytes = match format(cfg) {
        Format::Json => json(&MeansReport {
            input: &r.label,
            fingerprints: series
                .iter()
                .map(|s| (s.kind, s.fingerprint.clone()))
                .collect(),
            rows,
        })?,
        Format::Csv => {
            let mut t = Table::new(&["abscissa", "sigma", "tau", "tau2", "quad_err"])?;
            t.comment(format!("input: {}", r.label));
            if let Some(note) = axis_note(&grid) {
                t.comment(note);
            }
            for row in rows.iter().filter(|r| !r.converged) {
                t.comment(format!(
                    "unconverged at abscissa {}",
                    abscissa(&row.abscissa)
                ));
            }
            for row in &rows {
                t.row([
                    abscissa(&row.abscissa),
                    opt(row.sigma),
                    opt(row.tau),
                    opt(row.tau2),
                    num(row.quad_err),
                ])?;
            }
            t.into_bytes()?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(if soft > 0 {
        Status::SoftFailure
    } else {
        Status::Ok
    })
}

fn default_mean_grid(r: &Resolved) -> Grid {
    if r.log_axis {
        plateau_logs()
    } else if r.spec.is_discrete() {
        Grid::n_decades(1, 4).expect("valid")
    } else {
        Grid::t_decades(1, 6).expect("valid")
    }
}

// ---------------------------------------------------------------------------
// tauber

pub fn tauber(cfg: &RunConfig) -> Result<Status> {
    let r = resolve(input(cfg)?, cfg.grid.as_ref(), &cfg.quad)?;
    let grid = grid_or(cfg.grid.as_ref(), &r, |r| {
        if r.log_axis {
            plateau_logs()
        } else if r.spec.is_discrete() {
            default_n_grid()
        } else {
            default_t_grid()
        }
    })?;
    let s = &cfg.tauber;
    let mut pc = ProfileConfig {
        lambda_upper: s
            .lambda_upper
            .clone()
            .unwrap_or_else(|| DEFAULT_UPPER_LAMBDAS.to_vec()),
        lambda_lower: s.lambda_lower.clone().unwrap_or_else(default_lower_lambdas),
        tail: s.tail,
        quad: cfg.quad,
        exec: Execution::Parallel,
        ..ProfileConfig::default()
    };
    if let Some(norm) = s.norm {
        pc.norm = norm;
    }
    if let Some(m) = s.max_window_index {
        pc.max_window_index = m;
    }
    let report = condition_profile(&r.spec, &grid, &pc)?;
    let status = if report.soft_failures() > 0 {
        Status::SoftFailure
    } else {
        Status::Ok
    };
    match (format(cfg), cfg.out.as_deref()) {
        (Format::Json, out) => emit(out, &json(&report)?)?,
        (Format::Csv, None) => {
            let mut all = Vec::new();
            for (i, (name, bytes)) in matrices(&report, &grid)?.into_iter().enumerate() {
                if i > 0 {
                    all.push(b'\n');
                }
                all.extend(format!("# matrix: {name}\n").into_bytes());
                all.extend(bytes);
            }
            emit(None, &all)?;
        }
        (Format::Csv, Some(dir)) => write_dir(dir, &report, &grid)?,
    }
    Ok(status)
}

/// One CSV per condition, plus the full report as JSON.
fn write_dir(dir: &Path, report: &TauberianReport, grid: &Grid) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in matrices(report, grid)? {
        emit(Some(&dir.join(format!("{name}.csv"))), &bytes)?;
    }
    emit(Some(&dir.join("report.json")), &json(report)?)
}

fn matrices(report: &TauberianReport, grid: &Grid) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let values = |rows: &[Vec<logtauber_core::tauberian::WindowAvg>]| -> Vec<Vec<Option<f64>>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .map(|w| w.value.filter(|_| w.usable()).map(|v| v.re()))
                    .collect()
            })
            .collect()
    };
    let mut out = Vec::new();
    for (name, lambdas, rows) in [
        ("upper", &report.lambda_upper, values(&report.upper_profile)),
        ("lower", &report.lambda_lower, values(&report.lower_profile)),
        ("sd_margin", &report.lambda_upper, report.sd_margin.clone()),
        (
            "so_modulus",
            &report.lambda_upper,
            report.so_modulus.clone(),
        ),
    ] {
        let mut header = vec!["lambda".to_string()];
        header.extend(report.abscissae.iter().map(abscissa));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs)?;
        t.comment(
            "rows: lambda; columns: abscissa; empty cells are empty, skipped or undefined windows",
        );
        if let Some(note) = axis_note(grid) {
            t.comment(note);
        }
        for (l, row) in lambdas.iter().zip(&rows) {
            let mut fields = vec![num(*l)];
            fields.extend(row.iter().map(|&v| opt(v)));
            t.row(fields)?;
        }
        out.push((name, t.into_bytes()?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// identity

#[derive(Serialize)]
struct IdentityRow {
    abscissa: Abscissa,
    lambda: f64,
    /// Sequence expression of a random draw.
    #[serde(skip_serializing_if = "Option::is_none")]
    expr: Option<String>,
    residual: Option<IdentityResidual>,
    status: &'static str,
}

fn status_name(s: IdentityStatus) -> &'static str {
    match s {
        IdentityStatus::Verified => "verified",
        IdentityStatus::Exceeded => "exceeded",
        IdentityStatus::Unverified => "unverified",
    }
}

fn check_lambda(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite() && l != 1.0) {
        bail!("identity needs lambda > 0 and != 1, got {l}");
    }
    Ok(())
}

fn discrete_row(s: &SeqSpec, n: u64, lambda: f64, expr: Option<String>) -> Result<IdentityRow> {
    let end = discrete_window_end(n, lambda)?;
    let residual = if end == n {
        None
    } else if lambda > 1.0 {
        Some(lemma2_upper_residual(s, n, lambda)?)
    } else {
        Some(lemma2_lower_residual(s, n, lambda)?)
    };
    Ok(IdentityRow {
        abscissa: Abscissa::N(n),
        lambda,
        expr,
        status: residual.map_or("empty", |r| status_name(r.status)),
        residual,
    })
}

pub fn identity(cfg: &RunConfig) -> Result<Status> {
    let lambdas = cfg
        .identity
        .lambdas
        .clone()
        .unwrap_or_else(|| DEFAULT_IDENTITY_LAMBDAS.to_vec());
    if lambdas.is_empty() {
        bail!("no lambdas given");
    }
    for &l in &lambdas {
        check_lambda(l)?;
    }
    let (rows, comments) = match cfg.identity.random {
        Some(count) => {
            if cfg.input.is_some() {
                bail!("random identity runs draw their own sequences; drop the input");
            }
            let seed = cfg.seed.unwrap_or(0);
            (
                random_rows(count, seed)?,
                vec![format!("random sequences, seed {seed}")],
            )
        }
        None => {
            let r = resolve(input(cfg)?, cfg.grid.as_ref(), &cfg.quad)?;
            let grid = grid_or(cfg.grid.as_ref(), &r, |r| {
                if r.log_axis {
                    plateau_logs()
                } else if r.spec.is_discrete() {
                    Grid::n_decades(1, 4).expect("valid")
                } else {
                    Grid::t_decades(1, 6).expect("valid")
                }
            })?;
            let cells: Vec<(Abscissa, f64)> = grid
                .abscissae()
                .into_iter()
                .flat_map(|x| lambdas.iter().map(move |&l| (x, l)))
                .collect();
            let rows = try_map_ordered(&cells, Execution::Parallel, |&(x, l)| {
                sweep_cell(&r.spec, x, l, cfg)
            })?;
            let mut comments = vec![format!("input: {}", r.label)];
            comments.extend(axis_note(&grid).map(String::from));
            (rows, comments)
        }
    };
    let worst = identity_exit(rows.iter().map(|r| r.status));
    let bytes = match format(cfg) {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut t = Table::new(&["abscissa", "lambda", "lhs", "rhs", "residual", "status"])?;
            for c in comments {
                t.comment(c);
            }
            for (i, row) in rows.iter().enumerate() {
                if let Some(e) = &row.expr {
                    t.comment(format!("row {}: s_k = {e}", i + 1));
                }
            }
            for row in &rows {
                let r = row.residual.as_ref();
                t.row([
                    abscissa(&row.abscissa),
                    num(row.lambda),
                    opt(r.map(|r| r.lhs.re())),
                    opt(r.map(|r| r.rhs.re())),
                    opt(r.map(|r| r.residual)),
                    row.status.to_string(),
                ])?;
            }
            t.into_bytes()?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(worst)
}

/// Exceeded residuals dominate unverified ones.
fn identity_exit<'a>(statuses: impl Iterator<Item = &'a str>) -> Status {
    statuses
        .map(|s| match s {
            "exceeded" => Status::IdentityExceeded,
            "unverified" => Status::SoftFailure,
            _ => Status::Ok,
        })
        .max()
        .unwrap_or(Status::Ok)
}

fn sweep_cell(spec: &Spec, x: Abscissa, lambda: f64, cfg: &RunConfig) -> Result<IdentityRow> {
    let residual = match (spec, x) {
        (Spec::Seq(s), Abscissa::N(n)) => return discrete_row(s, n, lambda, None),
        (Spec::Func(f), Abscissa::T(t)) if lambda > 1.0 => {
            lemma1_upper_residual(f, t, lambda, &cfg.quad)?
        }
        (Spec::Func(f), Abscissa::T(t)) => lemma1_lower_residual(f, t, lambda, &cfg.quad)?,
        (Spec::Func(f), Abscissa::LogT(v)) => lemma1_residual_log(f, v, lambda, &cfg.quad)?,
        _ => bail!("complex inputs are not supported by the command line"),
    };
    Ok(IdentityRow {
        abscissa: x,
        lambda,
        expr: None,
        status: status_name(residual.status),
        residual: Some(residual),
    })
}

const ATOMS: [&str; 8] = [
    "1",
    "(-1)^k",
    "(-1)^k * k",
    "log(k)",
    "sin(k)",
    "cos(k / 3)",
    "1 / k",
    "sin(log(k))",
];

/// Seeded draws of (sequence, n, λ) with non-empty windows; `n` is
/// log-uniform in `[2, 1e4]` and λ uniform on `[1.05, 2]` or `[0.5, 0.95]`.
fn random_draws(count: usize, seed: u64) -> Vec<(String, u64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(count);
    while draws.len() < count {
        let terms = rng.gen_range(1..=3);
        let expr = (0..terms)
            .map(|_| {
                let c: f64 = rng.gen_range(-2.0..2.0);
                format!("{c:.6} * ({})", ATOMS[rng.gen_range(0..ATOMS.len())])
            })
            .collect::<Vec<_>>()
            .join(" + ");
        let n = rng.gen_range(2f64.ln()..RANDOM_MAX_N.ln()).exp().round() as u64;
        let lambda = if rng.gen_bool(0.5) {
            rng.gen_range(1.05..=2.0)
        } else {
            rng.gen_range(0.5..=0.95)
        };
        if discrete_window_end(n, lambda).is_ok_and(|end| end != n) {
            draws.push((expr, n, lambda));
        }
    }
    draws
}

fn random_rows(count: usize, seed: u64) -> Result<Vec<IdentityRow>> {
    let draws = random_draws(count, seed);
    map_ordered(&draws, Execution::Parallel, |(expr, n, lambda)| {
        let s = SeqSpec::parse(expr)?;
        discrete_row(&s, *n, *lambda, Some(expr.clone()))
    })
    .into_iter()
    .collect()
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Serialize)]
struct PlateauRow {
    m: u32,
    log_t: f64,
    tau_closed_form: f64,
    block_bound: f64,
    sigma_spike: f64,
}

pub fn counterexample(cfg: &RunConfig) -> Result<Status> {
    let m_max = cfg.counterexample.m_max.unwrap_or(DEFAULT_M_MAX);
    if !(1..=MAX_M).contains(&m_max) {
        bail!("m_max must be in 1..={MAX_M}, got {m_max}");
    }
    let rows: Vec<PlateauRow> = (1..=m_max)
        .map(|m| {
            let log_t = 2f64.powi(m as i32);
            PlateauRow {
                m,
                log_t,
                tau_closed_form: thm3_tau_closed_form(log_t),
                block_bound: thm3_block_bound(m),
                sigma_spike: thm3_sigma_spike(m),
            }
        })
        .collect();
    let bytes = match format(cfg) {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut t = Table::new(&[
                "m",
                "log_t",
                "tau_closed_form",
                "block_bound",
                "sigma_spike",
            ])?;
            t.comment("abscissa is log t = 2^m; block_bound = m(m-1)/2^m");
            for r in &rows {
                t.row([
                    r.m.to_string(),
                    num(r.log_t),
                    num(r.tau_closed_form),
                    num(r.block_bound),
                    num(r.sigma_spike),
                ])?;
            }
            t.into_bytes()?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(Status::Ok)
}

// ---------------------------------------------------------------------------
// catalog

#[derive(Serialize)]
struct CatalogRow {
    name: String,
    kind: &'static str,
    ordinary: Limit,
    c1: Limit,
    l1: Limit,
    l2: Limit,
    notes: &'static str,
}

fn limit_text(l: Limit) -> String {
    match (l.holds, l.value) {
        (false, _) => "none".into(),
        (true, None) => "exists".into(),
        (true, Some(a)) => format!("{a}"),
    }
}

pub fn catalog(cfg: &RunConfig) -> Result<Status> {
    let rows: Vec<CatalogRow> = catalog_list()
        .into_iter()
        .map(|e| CatalogRow {
            kind: e.kind(),
            ordinary: e.truth.has_ordinary_limit,
            c1: e.truth.c1_summable,
            l1: e.truth.l1_summable,
            l2: e.truth.l2_summable,
            notes: e.notes,
            name: e.name,
        })
        .collect();
    let bytes = match format(cfg) {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut t = Table::new(&["name", "kind", "ordinary", "c1", "l1", "l2", "notes"])?;
            for r in &rows {
                t.row([
                    r.name.clone(),
                    r.kind.to_string(),
                    limit_text(r.ordinary),
                    limit_text(r.c1),
                    limit_text(r.l1),
                    limit_text(r.l2),
                    r.notes.to_string(),
                ])?;
            }
            t.into_bytes()?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(Status::Ok)
}
