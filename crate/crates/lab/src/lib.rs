//! Config-driven experiments on top of `mincurv-core`: every subcommand reads
//! one TOML config, writes CSV/JSON artifacts plus a manifest into `--out`,
//! and exits 0 on success, 2 on invalid input and 3 on numerical failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::output::{write_atomic, Artifacts, Manifest};

/// Environment variable read for the worker thread count.
pub const THREADS_ENV: &str = "MINCURV_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mincurv_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{message}")]
    Check { message: String, detail: serde_json::Value },
    /// A failure that still produced artifacts worth keeping.
    #[error("{source}")]
    WithArtifacts { artifacts: Artifacts, source: Box<CliError> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::WithArtifacts { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
            CliError::Check { .. } => "check_failed",
            CliError::WithArtifacts { source, .. } => source.kind(),
        }
    }

    fn detail(&self) -> serde_json::Value {
        match self {
            CliError::Check { detail, .. } => detail.clone(),
            CliError::WithArtifacts { source, .. } => source.detail(),
            _ => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Multi-start search for positive T-periodic orbits at `problem.lambda`.
    Solve,
    /// Multi-start search over the `[scan]` λ grid.
    Scan,
    /// Pseudo-arclength continuation through the fold.
    Branch,
    /// Small- or large-family diagnostics along `[asymptotic].schedule`.
    Asymptotic,
    /// Principal (and optionally higher) periodic eigenvalues.
    Spectrum,
    /// Twist check and a pair of kT-periodic subharmonics.
    Subharmonic,
    /// A-posteriori checks on the orbits found at `problem.lambda`.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Scan => "scan",
            Command::Branch => "branch",
            Command::Asymptotic => "asymptotic",
            Command::Spectrum => "spectrum",
            Command::Subharmonic => "subharmonic",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mincurv", version, about = "Periodic solutions of an indefinite Minkowski-curvature equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, default_value = "mincurv.toml")]
    pub config: PathBuf,
    /// `section.key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

pub fn execute(command: Command, cfg: &config::RunConfig) -> Result<Artifacts, CliError> {
    match command {
        Command::Solve => commands::solve(cfg),
        Command::Scan => commands::scan(cfg),
        Command::Branch => commands::branch(cfg),
        Command::Asymptotic => commands::asymptotic(cfg),
        Command::Spectrum => commands::spectrum(cfg),
        Command::Subharmonic => commands::subharmonic(cfg),
        Command::Verify => commands::verify(cfg),
    }
}

fn threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn write_all(dir: &Path, artifacts: &Artifacts) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in &artifacts.files {
        write_atomic(dir, &a.name, &a.bytes)?;
    }
    Ok(())
}

/// Runs one subcommand end to end and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let outcome = (|| {
        let n = threads()?;
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        let loaded = config::load(&cli.config, &cli.overrides)?;
        let artifacts = execute(cli.command, &loaded.config);
        Ok::<_, CliError>((loaded, n, artifacts))
    })();
    let (loaded, n, result) = match outcome {
        Ok(v) => v,
        Err(e) => return report_failure(cli, &e, None),
    };
    let (artifacts, failure) = match result {
        Ok(a) => (a, None),
        Err(CliError::WithArtifacts { artifacts, source }) => (artifacts, Some(*source)),
        Err(e) => return report_failure(cli, &e, Some(&loaded.bytes)),
    };
    let manifest = Manifest {
        tool: "mincurv",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().into(),
        config_path: cli.config.display().to_string(),
        config_sha256: output::sha256_hex(&loaded.bytes),
        overrides: loaded.overrides.clone(),
        threads: n,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: Manifest::records(&artifacts),
    };
    let mut all = artifacts;
    if let Err(e) = all.json("manifest.json", &manifest).and_then(|_| write_all(&cli.out, &all)) {
        return report_failure(cli, &e, Some(&loaded.bytes));
    }
    match failure {
        None => {
            eprintln!("{}: wrote {} artifacts to {}", cli.command.name(), all.files.len(), cli.out.display());
            0
        }
        Some(e) => report_failure(cli, &e, Some(&loaded.bytes)),
    }
}

fn report_failure(cli: &Cli, e: &CliError, config: Option<&[u8]>) -> i32 {
    let code = e.exit_code();
    eprintln!("{}: error: {e}", cli.command.name());
    let diag = json!({
        "status": "error",
        "exit_code": code,
        "command": cli.command.name(),
        "kind": e.kind(),
        "message": e.to_string(),
        "detail": e.detail(),
        "config_sha256": config.map(output::sha256_hex),
    });
    let mut a = Artifacts::default();
    if a.json("diagnostic.json", &diag).and_then(|_| write_all(&cli.out, &a)).is_err() {
        eprintln!("could not write diagnostic.json to {}", cli.out.display());
    }
    code
}
