//! Orchestration behind the `contact` binary: configuration ingestion,
//! run directories with manifests, and the verification battery.

pub mod commands;
pub mod manifest;
pub mod verify;

use std::path::PathBuf;
use std::time::Instant;

use contact_core::config::{Config, ConfigError};
use contact_core::model::ModelError;
use thiserror::Error;

use manifest::{hash_text, run_id, RunDir, RunManifest, MANIFEST_VERSION};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CONTACT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn numerical(e: impl std::fmt::Display) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Check,
    Fk,
    Hierarchy,
    Simulate,
    Verify,
    Report,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Check => "check",
            Subcommand::Fk => "fk",
            Subcommand::Hierarchy => "hierarchy",
            Subcommand::Simulate => "simulate",
            Subcommand::Verify => "verify",
            Subcommand::Report => "report",
        }
    }
}

/// Inputs of one invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub subcommand: Subcommand,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Trajectories written to `trajectories.csv` by `fk`.
    pub dump_trajectories: usize,
}

/// What a command hands back to the orchestrator.
pub struct CommandResult {
    pub exit_code: i32,
    pub status: String,
    pub streams: Vec<String>,
    pub warnings: Vec<String>,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub status: String,
    pub run_dir: PathBuf,
}

/// Loads the configuration, runs the command and writes the manifest.
/// Configuration errors surface before any directory is created.
pub fn run(inv: &Invocation) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let mut config = Config::load(&inv.config)?;
    if let Some(seed) = inv.seed {
        config.seed = seed;
    }
    let config_hash = hash_text(&config.to_toml());
    let id = run_id(inv.subcommand.name(), &config_hash);
    let model = config.derive()?;
    let mut dir = RunDir::create(&inv.out, &id)?;
    dir.json("config.json", "resolved configuration", &config)?;
    let result = match inv.subcommand {
        Subcommand::Check => commands::check(&config, &model, &mut dir)?,
        Subcommand::Fk => commands::fk(&config, &model, inv.dump_trajectories, &mut dir)?,
        Subcommand::Hierarchy => commands::hierarchy(&config, &model, &mut dir)?,
        Subcommand::Simulate => commands::simulate(&config, &model, &mut dir)?,
        Subcommand::Verify => commands::verify(&config, &model, &mut dir)?,
        Subcommand::Report => commands::report(&config, &model, &mut dir)?,
    };
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        subcommand: inv.subcommand.name().to_string(),
        run_id: id,
        config_hash,
        seed: config.seed,
        streams: result.streams,
        module_versions: [
            (
                "contact-cli".to_string(),
                env!("CARGO_PKG_VERSION").to_string(),
            ),
            (
                "contact-core".to_string(),
                contact_core::VERSION.to_string(),
            ),
        ]
        .into_iter()
        .collect(),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code: result.exit_code,
        status: result.status.clone(),
        warnings: result.warnings,
        outputs: Vec::new(),
    };
    let run_dir = dir.finish(manifest)?;
    Ok(RunOutcome {
        exit_code: result.exit_code,
        status: result.status,
        run_dir,
    })
}
