use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use citecorr::cli;
use citecorr::inversion::Assumption;
use citecorr::runspec::load_runspec;

/// Simulate correlation attenuation in merged citation data sets.
#[derive(Parser)]
#[command(name = "citecorr", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write results.csv, results.json and figures.
    Sweep { runspec: PathBuf },
    /// Run one merge experiment.
    Point { runspec: PathBuf },
    /// Estimate subset correlations from an observed combined correlation.
    Invert {
        runspec: PathBuf,
        #[arg(long)]
        observed: f64,
        /// `equal` or `fixed:R1`
        #[arg(long)]
        assumption: Assumption,
        /// Interpolate this sweep CSV instead of simulating.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Plot two simulated sets as a jittered scatter.
    Scatter { runspec: PathBuf },
    /// Regenerate line figures from a results CSV.
    Figures {
        results: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
}

fn run(args: Args) -> citecorr::Result<()> {
    match args.command {
        Command::Sweep { runspec } => {
            let out = cli::sweep(&load_runspec(&runspec)?)?;
            println!("{} rows -> {}", out.rows.len(), out.csv.display());
            for f in out.figures {
                println!("figure -> {}", f.display());
            }
        }
        Command::Point { runspec } => {
            let result = cli::point(&load_runspec(&runspec)?)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("serializable")
            );
        }
        Command::Invert {
            runspec,
            observed,
            assumption,
            table,
        } => {
            let spec = load_runspec(&runspec)?;
            let est = cli::invert(&spec, observed, assumption, table.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&est).expect("serializable")
            );
        }
        Command::Scatter { runspec } => {
            let path = cli::scatter(&load_runspec(&runspec)?)?;
            println!("scatter -> {}", path.display());
        }
        Command::Figures { results, outdir } => {
            for f in cli::figures_from_csv(&results, &outdir)? {
                println!("figure -> {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
