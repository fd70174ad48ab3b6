//! `fracbubble` command-line driver: configuration, orchestration, and
//! reproducible result files with a hashed manifest.
//!
//! Exit codes: 0 ok, 1 a reported check failed, 2 computation error, 3 config error.

// `!(x > 0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

pub use config::{RunConfig, Setup};
pub use output::{Output, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "fracbubble", version, about = "Bubble solutions of (-Δ)^s u = εh u₊^q + u₊^p: landscape, asymptotics, solver, regularity, verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (default: the built-in n = 1 configuration).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; all written paths are relative to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (FRACBUBBLE_THREADS overrides).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Γ(μ,ξ) dump, slab certificate and critical points.
    Landscape,
    /// Rate fits and small-μ limits of Γ.
    Asymptotics,
    /// Construct the solutions u_ε near the critical points of Γ.
    Solve,
    /// Level-truncation iteration and recursion audit.
    Regularity,
    /// Run the invariant suite.
    Verify {
        /// Print the check names without running them.
        #[arg(long)]
        list: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Landscape => "landscape",
            Command::Asymptotics => "asymptotics",
            Command::Solve => "solve",
            Command::Regularity => "regularity",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Compute(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) | CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fracbubble_core::Error> for CliError {
    fn from(e: fracbubble_core::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

/// Thread count: FRACBUBBLE_THREADS, then `--threads`, then rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("FRACBUBBLE_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(CliError::Config(format!("FRACBUBBLE_THREADS = {v:?} is not a positive integer"))),
        };
    }
    match flag {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(k) => Ok(k),
        None => Ok(rayon::current_num_threads()),
    }
}

/// Runs one subcommand; returns the manifest (None for `verify --list`).
pub fn run(cli: &Cli) -> Result<Option<RunManifest>, CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Command::Verify { list: true } = cli.command {
        for name in commands::verify::CHECKS {
            println!("{name}");
        }
        return Ok(None);
    }
    let setup = config.validate()?;
    let threads = thread_count(cli.threads)?;
    let dir = cli.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("fracbubble-out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
    let mut out = Output::create(&dir)?;
    pool.install(|| match cli.command {
        Command::Landscape => commands::landscape::run(&setup, &mut out),
        Command::Asymptotics => commands::asymptotics::run(&setup, &mut out),
        Command::Solve => commands::solve::run(&setup, &mut out),
        Command::Regularity => commands::regularity::run(&setup, &mut out),
        Command::Verify { .. } => commands::verify::run(&setup, &mut out),
    })?;
    Ok(Some(out.finish(cli.command.name(), &setup.digest, threads)?))
}

/// Exit code of a finished run: 1 when any reported check failed.
pub fn exit_code(manifest: &RunManifest) -> i32 {
    if manifest.checks.iter().all(|c| c.pass) {
        0
    } else {
        1
    }
}
