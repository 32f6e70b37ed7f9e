use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod failure;
mod input;
mod outputs;

use failure::Failure;

#[derive(Parser)]
#[command(
    name = "cellsync",
    version,
    about = "Detect and quantify synchronization events across sensor channels",
    after_help = "Exit codes: 0 success, 1 output failure, 2 input error, 3 configuration error.\n\
                  SYNC_THREADS caps the number of worker threads; RUST_LOG sets the log level."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session with known injected events.
    Simulate(commands::SimulateArgs),
    /// Run the full analysis and write events, rates and metric curves.
    Detect(commands::DetectArgs),
    /// Peak mean correlation as a function of the correlation window.
    Scan(commands::ScanArgs),
    /// Per-criterion rate ratios of two runs.
    Compare(commands::CompareArgs),
    /// Print the rate table and event summary of a finished run.
    Report(commands::ReportArgs),
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SYNC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::config(format!("SYNC_THREADS={raw:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::other(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Detect(a) => commands::detect(a),
        Command::Scan(a) => commands::scan(a),
        Command::Compare(a) => commands::compare(a),
        Command::Report(a) => commands::report(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
