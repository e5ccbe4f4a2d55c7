//! Batch front end for the outlier-resistant PCA library: fit models on CSV
//! matrices, score data against saved models, and drive the contamination
//! experiment grid. Every command is a deterministic function of its inputs,
//! flags, and seed; outputs are written atomically with a checksum manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod artifacts;
mod commands;
mod csvio;
mod model_file;

use commands::CliError;

#[derive(Parser)]
#[command(name = "fasthcs", version, about = "Outlier-resistant principal component analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a robust PCA model to a CSV matrix
    Fit(FitArgs),
    /// Score a CSV matrix against a saved model and plot the distances
    Diagnose(DiagnoseArgs),
    /// Run a contamination experiment grid from a JSON config
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV matrix; rows are observations, columns are variables
    #[arg(long)]
    input: PathBuf,
    /// Number of principal components to fit (at least 2)
    #[arg(long)]
    q: usize,
    /// Random seed; identical runs reproduce byte-identical outputs
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Treat the first CSV row as a header and skip it
    #[arg(long)]
    header: bool,
    /// Assumed fraction of clean rows in (0, 1]; sets the subset search's
    /// pool size e = floor(fraction * n), which defaults to h
    #[arg(long, value_name = "FRACTION")]
    clean_fraction: Option<f64>,
    /// Hyperplane directions scored per candidate subset
    #[arg(long = "K", default_value_t = 25)]
    k: usize,
    /// Growing steps taking a starting subset up to h rows
    #[arg(long = "W", default_value_t = 5)]
    w: usize,
    /// Random directions for the projection-pursuit candidate
    #[arg(long, default_value_t = 1000)]
    pp_directions: usize,
    /// Cap on worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for model.json, subset.csv, manifest.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Input CSV matrix with the same columns the model was fit on
    #[arg(long)]
    input: PathBuf,
    /// Model JSON written by `fasthcs fit`
    #[arg(long)]
    model: PathBuf,
    /// Treat the first CSV row as a header and skip it
    #[arg(long)]
    header: bool,
    /// Assumed clean fraction for the orthogonal-distance cutoff
    /// (default: the model's h / n)
    #[arg(long, value_name = "FRACTION")]
    e_over_n: Option<f64>,
    /// Exit with code 1 when any observation is flagged
    #[arg(long)]
    fail_on_outliers: bool,
    /// Cap on worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for report.csv, diagnostics.svg, manifest.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment grid config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Cap on worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for results.csv, bias panels, manifest.json
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let threads = match &cli.command {
        Command::Fit(args) => args.threads,
        Command::Diagnose(args) => args.threads,
        Command::Simulate(args) => args.threads,
    };
    if let Some(threads) = threads {
        if threads == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::input(format!("could not size the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit(args) => {
            commands::cmd_fit(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose(args) => {
            let outliers_found = commands::cmd_diagnose(args)?;
            if outliers_found && args.fail_on_outliers {
                Ok(ExitCode::from(1))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Simulate(args) => {
            commands::cmd_simulate(args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
