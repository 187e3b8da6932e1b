//! `spcrit`: command-line front end for critical finite-state superprocesses.

mod commands;
mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SimulateArgs;
use error::CliError;

#[derive(Parser)]
#[command(name = "spcrit", version, about = "Critical superprocesses on finite state spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file; exits 2 if it is invalid.
    Validate { model: PathBuf },
    /// Perron pair, spectral gap, nu and the fitted expansion constant.
    Spectral {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Survival probabilities and t * P(survival) on a log grid.
    Kolmogorov {
        model: PathBuf,
        #[arg(long)]
        mu: String,
        /// a:b:n, n log-spaced times in [a, b]
        #[arg(long = "t-grid")]
        t_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional Laplace transform of t^{-1}<f, X_t> and its limit.
    Yaglom {
        model: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        t: f64,
        /// Initial measure; defaults to a unit mass at the first state.
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean, variance and second moment of <f, X_t>.
    Moments {
        model: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo paths at time t, one CSV row per path.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        f: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; the output does not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the acceptance suite; exits 3 if any check fails.
    Verify {
        model: PathBuf,
        /// Smaller randomized lemma suite.
        #[arg(long)]
        fast: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => commands::validate(&model),
        Command::Spectral { model, out } => commands::spectral(&model, out.as_deref()),
        Command::Kolmogorov { model, mu, t_grid, out } => {
            commands::kolmogorov(&model, &mu, &t_grid, out.as_deref())
        }
        Command::Yaglom { model, f, lambda, t, mu, out } => {
            commands::yaglom(&model, &f, lambda, t, mu.as_deref(), out.as_deref())
        }
        Command::Moments { model, f, t, mu, out } => {
            commands::moments(&model, &f, t, &mu, out.as_deref())
        }
        Command::Simulate { model, mu, t, dt, paths, seed, f, out, threads } => {
            commands::simulate(&SimulateArgs { model, mu, t, dt, paths, seed, f, out, threads })
        }
        Command::Verify { model, fast } => commands::verify(&model, fast),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spcrit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
