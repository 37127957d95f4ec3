//! Run configuration: a JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use logtauber_core::catalog::catalog_get;
use logtauber_core::means::{integral_mode_with, MeanKind, INTEGRAL_MODE_STEP};
use logtauber_core::model::{parse_expr, FuncSpec, Grid, SegmentBody, SeqSpec, Spec, Var};
use logtauber_core::quadrature::QuadConfig;
use logtauber_core::tauberian::DiscreteNorm;
use serde::Deserialize;

/// Where the input comes from. Exactly one source per run.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    /// Catalog name, e.g. `"const(5)"`.
    Catalog(String),
    /// Function of `u` on `[domain_start, inf)`.
    Expr {
        text: String,
        #[serde(default = "one")]
        domain_start: f64,
    },
    /// Sequence expression in `k`.
    Seq(String),
    /// Explicit terms `s_1, s_2, ...`.
    List(Vec<f64>),
    /// Piecewise function of `u`.
    Segments(Vec<SegmentInput>),
    /// `s(u) = ∫_{domain_start}^u f(x) dx` for an integrand in `x`.
    Integrand {
        text: String,
        #[serde(default = "one")]
        domain_start: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentInput {
    pub start: f64,
    pub expr: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridInput {
    T(Vec<f64>),
    LogT(Vec<f64>),
    N(Vec<u64>),
    TDecades([i32; 2]),
    NDecades([u32; 2]),
    LogSpaced { start: f64, stop: f64, count: usize },
    NLogSpaced { lo: u32, hi: u32, per_decade: usize },
}

impl GridInput {
    pub fn build(&self) -> Result<Grid> {
        Ok(match self {
            GridInput::T(p) => Grid::t(p.clone())?,
            GridInput::LogT(p) => Grid::log_t(p.clone())?,
            GridInput::N(p) => Grid::n(p.clone())?,
            GridInput::TDecades([lo, hi]) => Grid::t_decades(*lo, *hi)?,
            GridInput::NDecades([lo, hi]) => Grid::n_decades(*lo, *hi)?,
            GridInput::LogSpaced { start, stop, count } => Grid::log_spaced(*start, *stop, *count)?,
            GridInput::NLogSpaced { lo, hi, per_decade } => {
                Grid::n_log_spaced(*lo, *hi, *per_decade)?
            }
        })
    }

    fn is_discrete(&self) -> bool {
        matches!(
            self,
            GridInput::N(_) | GridInput::NDecades(_) | GridInput::NLogSpaced { .. }
        )
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MeansSection {
    pub kinds: Option<Vec<MeanKind>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TauberSection {
    pub lambda_upper: Option<Vec<f64>>,
    pub lambda_lower: Option<Vec<f64>>,
    pub tail: Option<usize>,
    pub norm: Option<DiscreteNorm>,
    pub max_window_index: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub lambdas: Option<Vec<f64>>,
    /// Number of seeded random sequence triples; replaces the grid sweep.
    pub random: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub m_max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<Input>,
    pub grid: Option<GridInput>,
    pub means: MeansSection,
    pub tauber: TauberSection,
    pub identity: IdentitySection,
    pub counterexample: CounterexampleSection,
    pub quad: QuadConfig,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn set_input(&mut self, input: Input) -> Result<()> {
        if self.input.is_some() {
            bail!("more than one input source given");
        }
        self.input = Some(input);
        Ok(())
    }
}

/// A resolved input with its display name.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: Spec,
    pub label: String,
    /// The plateau example runs on a `log t` axis.
    pub log_axis: bool,
}

/// Builds the spec, picking the sequence or function view of a catalog entry
/// from the grid when both exist.
pub fn resolve(input: &Input, grid: Option<&GridInput>, quad: &QuadConfig) -> Result<Resolved> {
    let want_seq = grid.map(GridInput::is_discrete);
    let plain = |spec: Spec, label: String| Resolved {
        spec,
        label,
        log_axis: false,
    };
    Ok(match input {
        Input::Catalog(name) => {
            let e = catalog_get(name)?;
            let spec = match (e.seq, e.func, want_seq) {
                (Some(s), _, Some(true) | None) => Spec::Seq(s),
                (_, Some(f), Some(false) | None) => Spec::Func(f),
                (Some(s), None, Some(false)) => Spec::Seq(s),
                (None, Some(f), Some(true)) => Spec::Func(f),
                (None, None, _) => unreachable!("catalog entries have a view"),
            };
            Resolved {
                log_axis: e.name == "thm3",
                spec,
                label: e.name,
            }
        }
        Input::Expr { text, domain_start } => plain(
            Spec::Func(FuncSpec::expr(*domain_start, text)?),
            text.clone(),
        ),
        Input::Seq(text) => plain(Spec::Seq(SeqSpec::parse(text)?), text.clone()),
        Input::List(xs) => {
            if xs.iter().any(|x| !x.is_finite()) {
                bail!("list terms must be finite");
            }
            plain(
                Spec::Seq(SeqSpec::List(xs.clone())),
                format!("list of {}", xs.len()),
            )
        }
        Input::Segments(segs) => {
            let pieces = segs
                .iter()
                .map(|s| Ok((s.start, SegmentBody::Expr(parse_expr(&s.expr, Var::U)?))))
                .collect::<Result<Vec<_>>>()?;
            plain(Spec::Func(FuncSpec::new(pieces)?), "piecewise".into())
        }
        Input::Integrand { text, domain_start } => {
            let f = FuncSpec::expr_in(*domain_start, text, Var::X)?;
            plain(
                Spec::Func(integral_mode_with(f, INTEGRAL_MODE_STEP, *quad)),
                format!("integral of {text}"),
            )
        }
    })
}

/// Grid from the config, or `default` for the spec.
pub fn grid_or(
    grid: Option<&GridInput>,
    r: &Resolved,
    default: impl FnOnce(&Resolved) -> Grid,
) -> Result<Grid> {
    let g = match grid {
        Some(g) => g.build()?,
        None => default(r),
    };
    let g = match (g, r.log_axis) {
        (Grid::T(ts), true) => Grid::log_t(ts.iter().map(|t| t.ln()).collect())?,
        (g, _) => g,
    };
    if r.spec.is_discrete() != g.is_discrete() {
        bail!("sequences need an integer grid and functions a t or log t grid");
    }
    Ok(g)
}

/// `log t = 2, 4, ..., 512` for the plateau example.
pub fn plateau_logs() -> Grid {
    Grid::log_t((1..=9).map(|m| 2f64.powi(m)).collect()).expect("increasing")
}
