//! `varfit`: residual variance estimation, simulation and diagnostics.

mod analyze;
mod estimate;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status for each failure class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(varfit::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use varfit::Error::*;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(Config(_)) => 1,
            CliError::Core(InvalidSample(_) | NotEquallySpaced | Dimension { .. } | Data(_))
            | CliError::Core(Io(_) | Csv(_) | Json(_)) => 2,
            CliError::Core(Bandwidth { .. } | Precondition(_) | Moments(_)) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<varfit::Error> for CliError {
    fn from(e: varfit::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "varfit",
    version,
    about = "Difference-based residual variance estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the residual variance of a CSV dataset.
    Estimate(estimate::EstimateArgs),
    /// Run Monte Carlo cells or the full benchmark table.
    Simulate(simulate::SimulateArgs),
    /// Exact and asymptotic diagnostics for a design.
    Analyze(analyze::AnalyzeArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("VARFIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "VARFIT_THREADS must be a positive integer, got '{value}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Analyze(args) => analyze::run(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
