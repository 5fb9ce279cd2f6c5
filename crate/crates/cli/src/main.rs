//! `biharm` — command-line driver for the resonant biharmonic laboratory.
//!
//! Five subcommands expose the core crate's machinery: `eig` (spectra and
//! ground state), `hypotheses` (exponent-bundle table over a p-grid),
//! `continue` (homotopy continuation to a target forcing), `sweep` (a-priori
//! envelope over forcing amplitudes), and `hardy-sobolev` (weighted embedding
//! quotients on random fields at two resolutions).
//!
//! Exit codes are fixed and disjoint: 0 success, 2 configuration errors,
//! 3 solver/continuation failures, 4 violated structural hypotheses.

mod config;
mod output;
mod runs;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use biharm_core::CoreError;
use config::RunConfig;

/// Failure classes with fixed exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable/invalid configuration or I/O problems — exit 2.
    Config(String),
    /// The discrete solvers gave up — exit 3.
    Solver(String),
    /// A structural hypothesis of the underlying theory fails — exit 4.
    Hypothesis(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Hypothesis(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Hypothesis(m) => write!(f, "hypothesis violation: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        match e {
            CoreError::HypothesisViolation(m) => CliError::Hypothesis(m),
            CoreError::NoConvergence { .. }
            | CoreError::DegenerateLinearization(_)
            | CoreError::ContinuationFailed { .. } => CliError::Solver(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "biharm",
    version,
    about = "Finite-difference laboratory for a resonant biharmonic problem"
)]
struct Cli {
    /// Path to a key=value configuration file (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Laplacian/biharmonic spectra and the discrete ground state.
    Eig,
    /// Tabulate the exponent bundle and hypothesis checks over a p-grid.
    Hypotheses,
    /// Run homotopy continuation from the reference state to the target forcing.
    Continue,
    /// Sweep forcing amplitudes and record the a-priori envelope data.
    Sweep,
    /// Sample the weighted embedding quotient at two resolutions.
    HardySobolev,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            config::parse_config(&text).map_err(CliError::Config)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Eig => runs::eig(&cfg),
        Command::Hypotheses => runs::hypotheses(&cfg),
        Command::Continue => runs::continuation(&cfg),
        Command::Sweep => runs::sweep(&cfg),
        Command::HardySobolev => runs::hardy_sobolev(&cfg),
    }
}
