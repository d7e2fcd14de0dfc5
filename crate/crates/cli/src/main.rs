//! `lgscrl`: synthetic data, critic training, PPO alignment and backtesting.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "LGSCRL_OUT";
const DEFAULT_OUT: &str = "lgscrl-out";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<lgscrl::Error> for CliError {
    fn from(e: lgscrl::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lgscrl", version, about = "Local-Global return models with LLM-guided feature masks")]
pub struct Cli {
    /// TOML experiment config; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// master seed for every random draw
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// output directory [default: config paths.out, then $LGSCRL_OUT, then ./lgscrl-out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// worker threads; 1 gives bit-reproducible runs
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// more log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market with a planted feature support
    Synth(commands::synth::SynthArgs),
    /// Train a Local, LG-STOCK or LG-LLM critic
    Train(commands::train::TrainArgs),
    /// Align a mask policy on top of an LG-STOCK critic with PPO
    Align(commands::align::AlignArgs),
    /// Backtest one or more checkpoints on the test period
    Backtest(commands::backtest::BacktestArgs),
    /// Summarise the metrics files of a backtest run
    Report(commands::report::ReportArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    let mut cfg = config::ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
        cfg.supervised.seed = seed;
        cfg.scrl.ppo.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.paths.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = commands::Context { cfg, out };
    match cli.command {
        Command::Synth(a) => commands::synth::run(ctx, a, cli.seed),
        Command::Train(a) => commands::train::run(ctx, a),
        Command::Align(a) => commands::align::run(ctx, a),
        Command::Backtest(a) => commands::backtest::run(ctx, a),
        Command::Report(a) => commands::report::run(ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
