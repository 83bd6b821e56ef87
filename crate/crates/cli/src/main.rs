//! `spinbound` command-line runner.
//!
//! Each subcommand reads a JSON config (one experiment or an array of them),
//! validates every entry up front, runs the entries in parallel and writes
//! `<task>.csv` plus one JSON report per entry into the output directory.
//!
//! Exit codes: 0 success, 2 config error, 3 solver non-optimal,
//! 4 internal invariant violation, 1 anything else (e.g. I/O).

mod config;
mod table;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use config::{Job, Task};

/// Environment variable that overrides the default output directory.
const OUT_DIR_ENV: &str = "SPINBOUND_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "spinbound-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NonOptimal(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] spinbound::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use spinbound::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::NonOptimal(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Core(e) => match e {
                E::SiteOutOfRange { .. } | E::InvalidArgument(_) | E::Parse(_) | E::NotRepresentable(_) => 2,
                E::Solver(_) => 3,
                E::Structure(_) | E::NumericalBreakdown(_) => 4,
                E::Io(_) => 1,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "spinbound", version, about = "Certified ground-state bounds for Heisenberg spin models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower-bound the ground energy with the moment relaxation.
    Energy(RunArgs),
    /// Certify two-sided bounds on observables inside an energy window.
    Observable(RunArgs),
    /// Cluster (Anderson-type) lower bounds from open subsystems.
    Anderson(RunArgs),
    /// Exact diagonalization and product-state upper bounds.
    Exact(RunArgs),
    /// Write the real conic form of the energy relaxation as SDPA.
    Export(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with one experiment or an array of experiments.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $SPINBOUND_OUT_DIR or ./spinbound-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of experiments run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seed for the product-state restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match &cli.command {
        Command::Energy(a) => (Task::Energy, a),
        Command::Observable(a) => (Task::Observable, a),
        Command::Anderson(a) => (Task::Anderson, a),
        Command::Exact(a) => (Task::Exact, a),
        Command::Export(a) => (Task::Export, a),
    };
    match run(task, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Validates every entry; the first problem aborts before any compute.
fn prepare(task: Task, args: &RunArgs) -> Result<Vec<Job>, CliError> {
    if args.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    config::read_configs(&args.config)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| config::resolve(i, c, task, args.seed))
        .collect()
}

fn run(task: Task, args: &RunArgs) -> anyhow::Result<u8> {
    let jobs = match prepare(task, args) {
        Ok(jobs) => jobs,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(e.exit_code());
        }
    };
    let out = out_dir(args);
    std::fs::create_dir_all(out.join("reports"))
        .with_context(|| format!("creating {}", out.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .context("building the worker pool")?;
    let results: Vec<Result<tasks::Outcome, CliError>> =
        pool.install(|| jobs.par_iter().map(|job| tasks::run(job, &out)).collect());

    let mut code = 0u8;
    let mut rows = Vec::new();
    for (job, result) in jobs.iter().zip(results) {
        let report = match result {
            Ok(outcome) => {
                if !outcome.optimal {
                    eprintln!("{}: solver stopped before reaching the requested accuracy", job.stem());
                    code = code.max(3);
                }
                rows.extend(outcome.rows);
                serde_json::json!({
                    "task": task.name(),
                    "config_hash": job.hash,
                    "seed": job.seed,
                    "toggles": job.symmetry.label(),
                    "config": job.config,
                    "optimal": outcome.optimal,
                    "result": outcome.report,
                })
            }
            Err(e) => {
                eprintln!("{}: {e}", job.stem());
                code = code.max(e.exit_code());
                serde_json::json!({
                    "task": task.name(),
                    "config_hash": job.hash,
                    "seed": job.seed,
                    "config": job.config,
                    "error": e.to_string(),
                    "exit_code": e.exit_code(),
                })
            }
        };
        write_report(&out, job, &report)?;
    }
    let csv = out.join(format!("{}.csv", task.name()));
    std::fs::write(&csv, table::render(task, &rows))
        .with_context(|| format!("writing {}", csv.display()))?;
    println!("{}", csv.display());
    Ok(code)
}

fn write_report(out: &Path, job: &Job, report: &serde_json::Value) -> anyhow::Result<()> {
    let path = out.join("reports").join(format!("{}.json", job.stem()));
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
