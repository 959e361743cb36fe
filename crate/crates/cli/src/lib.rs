//! Command-line front end.

pub mod cache;
pub mod commands;
pub mod config;
pub mod references;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::cache::HCache;
use crate::commands::Session;
use crate::config::{RunConfig, DEFAULT_SEED};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "covsel", version, about = "Two-stage ranking and selection with covariates")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (CSV for run, reproduce and case-study).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory for cached h constants.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Always solve h afresh.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the critical constant h.
    SolveH,
    /// Run a Monte Carlo experiment.
    Run,
    /// Rerun the nine built-in problems and compare with published results.
    Reproduce {
        /// 1: expectation-form constants and PCS_E; 2: minimum-form constants and PCS_min
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
        /// Fraction of the full-scale replications (10⁴) and test covariates (10⁵) [default: 0.02]
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Compare personalized and one-size-fits-all regimens on the Markov model.
    CaseStudy,
}

/// Exit code for an error: numerical failures are distinguished from bad input.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.chain().find_map(|e| e.downcast_ref::<covsel::Error>()) {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn execute(cli: Cli) -> anyhow::Result<String> {
    let requires_config = matches!(cli.command, Command::SolveH | Command::Run);
    let (config, base_dir) = match &cli.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(PathBuf::from).unwrap_or_default(),
        ),
        None if requires_config => anyhow::bail!(covsel::Error::InvalidArgument(
            "this command needs --config PATH".into()
        )),
        None => (RunConfig::default(), PathBuf::new()),
    };
    let cache = if cli.no_cache {
        HCache::new(None)
    } else {
        HCache::new(Some(cli.cache_dir.clone().unwrap_or_else(HCache::default_dir)))
    };
    let session = Session {
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        config,
        base_dir,
        out: cli.out.clone(),
        cache,
    };
    let work = || match cli.command {
        Command::SolveH => session.solve_h(),
        Command::Run => session.run(),
        Command::Reproduce { table, scale } => {
            session.reproduce(table, scale.or(session.config.scale).unwrap_or(0.02))
        }
        Command::CaseStudy => session.case_study(),
    };
    match cli.workers {
        Some(0) => anyhow::bail!(covsel::Error::InvalidArgument("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker pool")?
            .install(work),
        None => work(),
    }
}

/// Parse `args`, run, print, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
