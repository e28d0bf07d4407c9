//! Command-line front end: chain files in, versioned JSON reports out.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 unreadable input,
//! 3 the pipeline rejected the chain.

pub mod commands;
pub mod input;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use hitlace::block::BlockStructure;
use serde_json::json;

pub use commands::{SimSettings, Tolerances};
pub use input::{collapse_states, resolve_state, Chain, ChainInput};
pub use report::{Report, Verdict, SCHEMA};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hitlace", version, about = "Hitting-time decompositions of finite Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Target state label (or index); overrides the file's "target".
    #[arg(long, global = true)]
    pub target: Option<String>,
    #[arg(long, global = true, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = positive)]
    pub tol_algebraic: f64,
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    pub tol_spectral: f64,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated states merged into one before processing.
    #[arg(long, global = true, value_delimiter = ',')]
    pub collapse: Option<Vec<String>>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s} is not a positive number")),
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check a chain file and report irreducibility, period and reversibility.
    Validate { input: PathBuf },
    /// Star decomposition of the hitting time from stationarity.
    Decompose {
        input: PathBuf,
        /// CDF table path; defaults to the report path with extension `csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compound-geometric representation and its ladder dual.
    BrownV {
        input: PathBuf,
        /// States from bottom to top, for the stochastic-monotonicity check.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Moran partition chain on n objects.
    Moran { n: usize },
    /// Block dual for a user-supplied block structure.
    Block {
        input: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
    },
    /// Monte Carlo sample-path linking through the star link.
    LinkSim {
        input: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
        checkpoints: Vec<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Decompose { .. } => "decompose",
            Command::BrownV { .. } => "brown-v",
            Command::Moran { .. } => "moran",
            Command::Block { .. } => "block",
            Command::LinkSim { .. } => "link-sim",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Command::Validate { input }
            | Command::Decompose { input, .. }
            | Command::BrownV { input, .. }
            | Command::Block { input, .. }
            | Command::LinkSim { input, .. } => Some(input),
            Command::Moran { .. } => None,
        }
    }
}

/// Result of one invocation: the report, an optional CSV side output and the exit code.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub csv: Option<String>,
    pub exit_code: i32,
}

fn config_echo(cli: &Cli) -> serde_json::Value {
    let c = &cli.common;
    let mut v = json!({
        "target": c.target,
        "horizon": c.horizon,
        "seed": c.seed,
        "tol_algebraic": c.tol_algebraic,
        "tol_spectral": c.tol_spectral,
        "collapse": c.collapse,
    });
    match &cli.command {
        Command::Moran { n } => v["n"] = json!(n),
        Command::BrownV { order, .. } => v["order"] = json!(order),
        Command::LinkSim { paths, workers, checkpoints, .. } => {
            v["paths"] = json!(paths);
            v["workers"] = json!(workers);
            v["checkpoints"] = json!(checkpoints);
        }
        _ => {}
    }
    if let Some(p) = cli.command.input() {
        v["input"] = json!(p.display().to_string());
    }
    v
}

fn load(cli: &Cli, path: &Path) -> Result<Result<Chain, hitlace::Error>, String> {
    let raw = ChainInput::read(path)?;
    Ok(raw.validate().and_then(|chain| match &cli.common.collapse {
        Some(subset) => chain.collapse(subset, cli.common.target.as_deref()),
        None => Ok(chain),
    }))
}

/// Executes a parsed command line without touching stdout or the report path.
pub fn run(cli: &Cli) -> Run {
    let mut report = Report {
        schema: SCHEMA,
        command: cli.command.name().to_string(),
        config: config_echo(cli),
        payload: None,
        error: None,
        verdicts: Vec::new(),
    };
    let fail = |mut report: Report, msg: String, code: i32| {
        report.error = Some(msg);
        Run { report, csv: None, exit_code: code }
    };
    let chain = match cli.command.input().map(|p| load(cli, p)) {
        None => None,
        Some(Err(msg)) => return fail(report, msg, EXIT_PARSE),
        Some(Ok(Err(e))) => return fail(report, e.to_string(), EXIT_PIPELINE),
        Some(Ok(Ok(c))) => Some(c),
    };
    let c = &cli.common;
    let tol = Tolerances { algebraic: c.tol_algebraic, spectral: c.tol_spectral };
    let target = c.target.as_deref();
    let horizon = c.horizon as usize;
    let mut csv = None;
    let outcome = match (&cli.command, chain.as_ref()) {
        (Command::Validate { .. }, Some(ch)) => commands::validate(ch),
        (Command::Decompose { .. }, Some(ch)) => commands::decompose_cmd(ch, target, horizon, &tol).map(|(p, v, table)| {
            csv = Some(table);
            (p, v)
        }),
        (Command::BrownV { order, .. }, Some(ch)) => commands::brown_v(ch, target, horizon, order.as_deref(), &tol),
        (Command::Moran { n }, _) => commands::moran(*n, horizon, &tol),
        (Command::Block { blocks, .. }, Some(ch)) => {
            let parsed = std::fs::read_to_string(blocks)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<BlockStructure>(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(b) => commands::block(ch, &b, target, &tol),
                Err(msg) => return fail(report, format!("{}: {msg}", blocks.display()), EXIT_PARSE),
            }
        }
        (Command::LinkSim { paths, workers, checkpoints, .. }, Some(ch)) => {
            let sim = SimSettings { paths: *paths, workers: *workers, checkpoints: checkpoints.clone(), seed: c.seed };
            commands::link_sim(ch, target, horizon, &sim)
        }
        (_, None) => unreachable!("commands with an input always load a chain"),
    };
    match outcome {
        Err(e) => fail(report, e.to_string(), EXIT_PIPELINE),
        Ok((payload, verdicts)) => {
            report.payload = Some(payload);
            report.verdicts = verdicts;
            let exit_code = if report.passed() { EXIT_PASS } else { EXIT_VERDICT };
            Run { report, csv, exit_code }
        }
    }
}

/// Where the CDF table of `decompose` goes, if anywhere.
pub fn csv_path(cli: &Cli) -> Option<PathBuf> {
    match &cli.command {
        Command::Decompose { csv: Some(p), .. } => Some(p.clone()),
        Command::Decompose { csv: None, .. } => cli.common.out.as_ref().map(|o| o.with_extension("csv")),
        _ => None,
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
