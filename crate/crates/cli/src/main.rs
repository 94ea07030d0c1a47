//! `contact <subcommand> --config <file> [--seed N] [--out DIR]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use contact_cli::{run, Invocation, Subcommand, EXIT_NUMERICAL, THREADS_ENV};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Transience and W-integrability conditions.
    Check,
    /// Feynman-Kac estimates of the density.
    Fk,
    /// Correlation hierarchy: stationary fields, ledger, evolution.
    Hierarchy,
    /// Particle ensembles and binned correlation estimates.
    Simulate,
    /// Oracle cross-checks for the configured backend.
    Verify,
    /// Plot-ready summary curves.
    Report,
}

#[derive(Debug, Parser)]
#[command(
    name = "contact",
    version,
    about = "Perturbed contact models: simulation and verification"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the root seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; the run lands in <out>/<run-id>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `fk`: also write this many trajectories to trajectories.csv.
    #[arg(long, default_value_t = 0)]
    dump_trajectories: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: cannot set {THREADS_ENV}={n}: {e}");
        }
    }
    let subcommand = match args.command {
        Command::Check => Subcommand::Check,
        Command::Fk => Subcommand::Fk,
        Command::Hierarchy => Subcommand::Hierarchy,
        Command::Simulate => Subcommand::Simulate,
        Command::Verify => Subcommand::Verify,
        Command::Report => Subcommand::Report,
    };
    let inv = Invocation {
        subcommand,
        config: args.config,
        seed: args.seed,
        out: args.out,
        dump_trajectories: args.dump_trajectories,
    };
    match run(&inv) {
        Ok(outcome) => {
            println!("{}", outcome.status);
            println!("run directory: {}", outcome.run_dir.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(0, EXIT_NUMERICAL) as u8)
        }
    }
}
