//! `medsel`: simulate scenarios, fit the mediation selection models, scan the
//! MRF coupling, summarize draws and evaluate selections.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 chains flagged
//! unconverged (outputs are still written), 4 runtime failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::{Classify, Failure, Status};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "medsel", version, about = "Bayesian variable selection for high-dimensional mediation analysis")]
struct Cli {
    /// Worker threads for chains and grid points (defaults to all cores).
    #[arg(long, env = "MEDSEL_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario dataset with its truth file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides scenario.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the chains and write draws, PSR report, selection summary and PPIs.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides hyper.eta.
        #[arg(long)]
        eta: Option<f64>,
        /// Phase-scan result supplying η when none is set.
        #[arg(long)]
        phase_scan: Option<PathBuf>,
        /// Skip writing per-chain draw files.
        #[arg(long)]
        no_draws: bool,
    },
    /// Scan the η grid and select the coupling below the phase transition.
    PhaseScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the selection summary from saved chain draws.
    Summarize {
        /// Chain directories, or fit outputs containing chain_* directories.
        #[arg(required = true)]
        draws: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        fdr: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        a_prime: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Operating characteristics of a fit against a truth file.
    Eval {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, fit and evaluate one replicate per seed, then tabulate.
    Replicate {
        #[arg(long)]
        config: PathBuf,
        /// For example `1-20` or `1,4,9`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        keep_draws: bool,
    },
}

fn load(path: &PathBuf, out: Option<PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path).config()?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> commands::Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")
            .config()?;
    }
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = load(&config, out)?;
            if let (Some(seed), Some(s)) = (seed, cfg.scenario.as_mut()) {
                s.seed = seed;
            }
            commands::simulate(&cfg)
        }
        Command::Fit { config, out, eta, phase_scan, no_draws } => {
            let mut cfg = load(&config, out)?;
            if eta.is_some() {
                cfg.hyper.eta = eta;
            }
            if phase_scan.is_some() {
                cfg.hyper.eta_from = phase_scan;
            }
            commands::fit(&cfg, !no_draws)
        }
        Command::PhaseScan { config, out } => commands::phase_scan(&load(&config, out)?),
        Command::Summarize { draws, fdr, a, a_prime, out } => {
            if !(fdr > 0.0 && fdr < 1.0) {
                return Err(Failure::Config(anyhow::anyhow!("--fdr must lie in (0, 1)")));
            }
            let contrast = commands::parse_contrast(a, a_prime).config()?;
            commands::summarize(&draws, fdr, contrast, &out)
        }
        Command::Eval { summary, truth, out } => commands::eval(&summary, &truth, &out),
        Command::Replicate { config, seeds, out, keep_draws } => {
            let cfg = load(&config, out)?;
            let seeds = commands::parse_seeds(&seeds).config()?;
            commands::replicate(&cfg, &seeds, keep_draws)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unconverged) => {
            eprintln!("medsel: chains did not converge (PSR at or above threshold); outputs are flagged");
            ExitCode::from(3)
        }
        Err(Failure::Config(e)) => {
            eprintln!("medsel: configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("medsel: {e:#}");
            ExitCode::from(4)
        }
    }
}
