//! `spclust` — clustering from sparse pairwise measurements.
//!
//! Subcommands cover the full experiment loop: sample planted benchmark
//! instances, run the three recovery algorithms, sweep a mean-degree grid
//! with repeated trials, inspect spectra against the detectability markers,
//! and cluster real point clouds from a partially labeled CSV.

use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod commands;
mod config;

#[derive(Parser)]
#[command(
    name = "spclust",
    version,
    about = "Clustering from sparse pairwise measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a planted benchmark instance; write the graph and true labels.
    Generate(config::CommonArgs),
    /// Run clustering methods on a stored graph; one CSV row per method.
    Run(config::CommonArgs),
    /// Sample and run over a mean-degree grid; raw and aggregate CSV rows.
    Sweep(config::CommonArgs),
    /// Dump leading spectrum values plus threshold markers for one instance.
    Spectrum(config::CommonArgs),
    /// Cluster a partially labeled point cloud (CSV) end to end.
    ClusterPoints(config::CommonArgs),
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    init_threads()?;
    let cli = Cli::parse();
    let (args, command): (_, fn(&config::Settings) -> anyhow::Result<()>) = match &cli.command {
        Cmd::Generate(a) => (a, commands::cmd_generate as _),
        Cmd::Run(a) => (a, commands::cmd_run as _),
        Cmd::Sweep(a) => (a, commands::cmd_sweep as _),
        Cmd::Spectrum(a) => (a, commands::cmd_spectrum as _),
        Cmd::ClusterPoints(a) => (a, commands::cmd_cluster_points as _),
    };
    let settings = config::resolve(args)?;
    command(&settings)
}

/// Honors the SPCLUST_THREADS environment variable for the sweep worker
/// pool; unset means the library default.
fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("SPCLUST_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| anyhow::anyhow!("SPCLUST_THREADS must be a positive integer, got '{raw}'"))?;
        // A failure here means the pool is already initialized (tests);
        // the variable still had to parse.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}
