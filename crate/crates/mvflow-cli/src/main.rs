//! `mvflow` — batch driver for mixed-volume-preserving curvature flows.
//!
//! Four subcommands, one contract: exit codes are the only process-level
//! signal, diagnostics go to stderr, and every piece of data lands in a
//! file. Anything the CLI does is a thin veneer over the `mvflow` library;
//! a run launched here and a run launched through [`mvflow::flow::run`]
//! produce identical trajectories.
//!
//! * `run` — execute one flow from a JSON config; writes `trajectory.csv`,
//!   `snapshots/`, `summary.json`, and `manifest.json`.
//! * `verify` — Monte Carlo certification of the curvature-function
//!   registry; writes `verify_report.json`.
//! * `sweep` — cartesian product of config axes, each run in its own
//!   directory, aggregated into `sweep.csv`.
//! * `plot` — self-contained SVG line charts from a trajectory CSV.
//!
//! Set `MVFLOW_LOG` to `error` (default), `info`, or `debug` to control
//! stderr verbosity.

mod manifest;
mod plot;
mod run;
mod svg;
mod sweep;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mvflow",
    version,
    about = "Normalized curvature flows of convex hypersurfaces: runs, sweeps, verification, plots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one flow from a JSON config and write its artifacts.
    Run {
        /// Path to the JSON flow config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Certify the curvature-function registry by Monte Carlo sampling.
    Verify {
        /// Hypersurface dimension the registry is instantiated for.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Cone samples per certified property.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// RNG seed; identical seeds give bitwise-identical reports.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a cartesian product of flow configs and tabulate the outcomes.
    Sweep {
        /// Path to the JSON sweep config (base config plus axes).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; each run gets its own `run_NNN/` inside.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Number of runs to execute in parallel.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Render SVG line charts from a trajectory CSV.
    Plot {
        /// Path to a `trajectory.csv` written by `run`.
        trajectory: PathBuf,
        /// Output directory for the SVG files (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MVFLOW_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run::cmd_run(&config, &out),
        Command::Verify {
            n,
            samples,
            seed,
            out,
        } => verify::cmd_verify(n, samples, seed, &out),
        Command::Sweep {
            config,
            out,
            workers,
        } => sweep::cmd_sweep(&config, &out, workers),
        Command::Plot { trajectory, out } => plot::cmd_plot(&trajectory, &out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("mvflow: {err:#}");
            ExitCode::from(1)
        }
    }
}
