//! `logtauber`: summability means, Tauberian window profiles and identity
//! checks from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use logtauber_core::means::MeanKind;

use commands::Status;
use config::{Format, GridInput, Input, RunConfig};

#[derive(Parser)]
#[command(
    name = "logtauber",
    version,
    about = "Logarithmic summability and Tauberian window diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (a directory for `tauber --format csv`); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    max_depth: Option<u32>,

    /// Catalog entry, e.g. `log_u` or `const(5)`.
    #[arg(long, global = true)]
    catalog: Option<String>,
    /// Function of `u`.
    #[arg(long, global = true)]
    expr: Option<String>,
    /// Sequence expression in `k`.
    #[arg(long, global = true)]
    seq: Option<String>,
    /// Integrand in `x`; the input becomes its running integral.
    #[arg(long, global = true)]
    integrand: Option<String>,
    /// Domain start for `--expr` and `--integrand`.
    #[arg(long, global = true, default_value_t = 1.0)]
    domain_start: f64,

    /// Comma-separated t values.
    #[arg(long, global = true, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Comma-separated log t values.
    #[arg(long, global = true, value_delimiter = ',')]
    log_t: Option<Vec<f64>>,
    /// Comma-separated indices n.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    /// Decades `LO:HI` of t.
    #[arg(long, global = true, value_parser = parse_range::<i32>)]
    t_decades: Option<(i32, i32)>,
    /// Decades `LO:HI` of n.
    #[arg(long, global = true, value_parser = parse_range::<u32>)]
    n_decades: Option<(u32, u32)>,
}

#[derive(Subcommand)]
enum Command {
    /// (C,1), (L,1) and (L,2) means over a grid.
    Means {
        /// Comma-separated subset of c1,l1,l2.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        kinds: Option<Vec<MeanKind>>,
    },
    /// Window-condition profiles and their tail verdict.
    Tauber {
        #[arg(long, value_delimiter = ',')]
        upper: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lower: Option<Vec<f64>>,
        /// Trailing grid points aggregated in the verdict.
        #[arg(long)]
        tail: Option<usize>,
    },
    /// Residuals of the representation identities.
    Identity {
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Check this many seeded random sequences instead of a grid sweep.
        #[arg(long)]
        random: Option<usize>,
    },
    /// Plateau counterexample table: τ falls while the (C,1) spikes grow.
    Counterexample {
        #[arg(long)]
        m_max: Option<u32>,
    },
    /// Catalog operations.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Every entry with its summability truth flags.
    List,
}

fn parse_range<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let parse = |x: &str| {
        x.trim()
            .parse::<T>()
            .map_err(|_| format!("bad bound `{x}`"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn parse_kind(s: &str) -> Result<MeanKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "c1" => Ok(MeanKind::C1),
        "l1" => Ok(MeanKind::L1),
        "l2" => Ok(MeanKind::L2),
        _ => Err(format!("unknown mean kind `{s}` (c1, l1, l2)")),
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let start = c.domain_start;
    if let Some(name) = &c.catalog {
        cfg.set_input(Input::Catalog(name.clone()))?;
    }
    if let Some(text) = &c.expr {
        cfg.set_input(Input::Expr {
            text: text.clone(),
            domain_start: start,
        })?;
    }
    if let Some(text) = &c.seq {
        cfg.set_input(Input::Seq(text.clone()))?;
    }
    if let Some(text) = &c.integrand {
        cfg.set_input(Input::Integrand {
            text: text.clone(),
            domain_start: start,
        })?;
    }

    let grids = [
        c.t.clone().map(GridInput::T),
        c.log_t.clone().map(GridInput::LogT),
        c.n.clone().map(GridInput::N),
        c.t_decades.map(|(a, b)| GridInput::TDecades([a, b])),
        c.n_decades.map(|(a, b)| GridInput::NDecades([a, b])),
    ];
    let mut given = grids.into_iter().flatten();
    if let Some(g) = given.next() {
        if given.next().is_some() {
            bail!("more than one grid flag given");
        }
        cfg.grid = Some(g);
    }

    if let Some(x) = c.abs_tol {
        cfg.quad.abs_tol = x;
    }
    if let Some(x) = c.rel_tol {
        cfg.quad.rel_tol = x;
    }
    if let Some(x) = c.max_depth {
        cfg.quad.max_depth = x;
    }
    cfg.quad.validate()?;
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if c.format.is_some() {
        cfg.format = c.format;
    }

    match &cli.command {
        Command::Means { kinds } => {
            if kinds.is_some() {
                cfg.means.kinds = kinds.clone();
            }
        }
        Command::Tauber { upper, lower, tail } => {
            let t = &mut cfg.tauber;
            t.lambda_upper = upper.clone().or(t.lambda_upper.take());
            t.lambda_lower = lower.clone().or(t.lambda_lower.take());
            t.tail = tail.or(t.tail);
        }
        Command::Identity { lambdas, random } => {
            let s = &mut cfg.identity;
            s.lambdas = lambdas.clone().or(s.lambdas.take());
            s.random = random.or(s.random);
        }
        Command::Counterexample { m_max } => {
            cfg.counterexample.m_max = m_max.or(cfg.counterexample.m_max);
        }
        Command::Catalog(_) => {}
    }
    Ok(cfg)
}

/// Sizes the global pool from `LOGTAUBER_THREADS`, if set.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("LOGTAUBER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("LOGTAUBER_THREADS must be a positive integer, got `{v}`"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: &Cli) -> Result<Status> {
    init_threads()?;
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Means { .. } => commands::means(&cfg),
        Command::Tauber { .. } => commands::tauber(&cfg),
        Command::Identity { .. } => commands::identity(&cfg),
        Command::Counterexample { .. } => commands::counterexample(&cfg),
        Command::Catalog(CatalogCommand::List) => commands::catalog(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Config as u8)
        }
    }
}
