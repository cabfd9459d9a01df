//! Experiment harness for the `qdt` library.
//!
//! Subcommands cover the full study: reference design scores (`table1`),
//! non-adaptive and two-step adaptive shot-scaling experiments driven by TOML
//! scenario files (`scaling`, `adaptive`), coherent-superposition probe
//! synthesis (`coherent`), detector-orientation sweeps (`robustness`), and
//! post-processing of scaling CSVs (`slope`, `plotdata`).
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 when `--check`
//! is passed and a declared threshold fails, 1 on any other runtime failure.

use std::fmt;
use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Errors surfaced to the shell, sorted by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad scenario file, bad flag combination, unreadable input: exit 2.
    Config(String),
    /// Failure while running an experiment: exit 1.
    Run(qdt::QdtError),
    /// A `[[check]]` window failed under `--check`: exit 3.
    Threshold(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Run(e) => write!(f, "run failed: {e}"),
            CliError::Threshold(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

impl From<qdt::QdtError> for CliError {
    fn from(e: qdt::QdtError) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
            CliError::Threshold(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qdt-cli",
    version,
    about = "Detector tomography experiment harness"
)]
pub struct Cli {
    /// Override the RNG seed declared in the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the repetition count declared in the scenario file.
    #[arg(long, global = true)]
    reps: Option<u32>,

    /// Directory for CSV/JSON artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for the repetition pool (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Reduced-size run: caps repetitions at 20, shot budgets at 10^5,
    /// search starts at 10, and sweep counts at 5.
    #[arg(long, global = true)]
    fast: bool,

    /// Exit with code 3 when any declared check window fails.
    #[arg(long, global = true)]
    check: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score the reference probe designs: analytic families, sampled random
    /// sets, and coherent-superposition rebuilds.
    Table1,
    /// Non-adaptive shot-scaling experiment from a scenario file.
    Scaling { config: PathBuf },
    /// Two-step adaptive shot-scaling experiment from a scenario file.
    Adaptive { config: PathBuf },
    /// Synthesize coherent-superposition probes from a scenario file.
    Coherent { config: PathBuf },
    /// Re-run an adaptive scenario under many random detector orientations.
    Robustness { config: PathBuf },
    /// Refit per-element log-log slopes from a scaling CSV.
    Slope {
        csv: PathBuf,
        /// Keep only shot budgets >= this value.
        #[arg(long, default_value_t = 0)]
        min_n: u64,
        /// Keep only shot budgets <= this value.
        #[arg(long, default_value_t = u64::MAX)]
        max_n: u64,
    },
    /// Write per-element mean/std curves as gnuplot-ready data files.
    Plotdata { csv: PathBuf },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.workers > 0 {
        // Ignore the error when a pool already exists (e.g. repeated calls in
        // tests); the experiment is deterministic regardless of pool size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Table1 => commands::table1(cli),
        Command::Scaling { config } => commands::scenario(cli, config, false),
        Command::Adaptive { config } => commands::scenario(cli, config, true),
        Command::Coherent { config } => commands::coherent(cli, config),
        Command::Robustness { config } => commands::robustness(cli, config),
        Command::Slope { csv, min_n, max_n } => commands::slope(cli, csv, *min_n, *max_n),
        Command::Plotdata { csv } => commands::plotdata(cli, csv),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        process::exit(e.exit_code());
    }
}
