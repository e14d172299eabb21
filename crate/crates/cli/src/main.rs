//! `scarlab`: experiment recipes for scar thermalization in the PXP chain.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Lab;
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "scarlab", version, about)]
struct Cli {
    /// JSON config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Spectrum cache directory (also settable through SCARLAB_CACHE_DIR).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Chain length.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Seed for Monte-Carlo commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Diagonalize, cache the spectrum and print a summary.
    Spectrum,
    /// Per-eigenstate diagnostics with the selected scars marked.
    Scars,
    /// Repeated-index factorization matrices over scar pairs.
    Factorization,
    /// Decomposition of a three-point scar correlator.
    Threepoint,
    /// Decomposition of a four-point scar correlator.
    Fourpoint,
    /// Crossing-term scaling with the sector dimension.
    Crossing,
    /// Monte-Carlo checks of Haar moments.
    Haar,
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(n) = cli.n {
        cfg.n_sites = n;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let cache_dir = cfg.resolve_cache_dir(cli.cache.as_deref());
    let ctx = Lab { cfg, cache_dir };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Scars => commands::scars(&ctx),
        Command::Factorization => commands::factorization(&ctx),
        Command::Threepoint => commands::threepoint(&ctx),
        Command::Fourpoint => commands::fourpoint(&ctx),
        Command::Crossing => commands::crossing(&ctx),
        Command::Haar => commands::haar(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("a numerical gate failed");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
