//! Verification driver: runs one identity-checking experiment against the
//! library and reports estimate-vs-target rows as CSV.
//!
//! Exit codes: 0 all rows pass, 2 any row fails, 3 no failures but at
//! least one row is underpowered, 1 usage or configuration error.

mod config;
mod experiments;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::exit;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "excloop", version, about = "occupation-measure identity verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit its CSV report.
    Run {
        /// Experiment id; `excloop list` shows them all.
        #[arg(long)]
        experiment: String,
        /// key=value config file overriding the embedded defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// RNG seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores, 1 = sequential).
        #[arg(long)]
        workers: Option<usize>,
        /// Write the report to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment ids and the identity each verifies.
    List,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version are successes; everything else is usage
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            exit(code);
        }
    };
    match cli.command {
        Command::List => {
            for (id, what) in config::EXPERIMENTS {
                println!("{id:<16} {what}");
            }
        }
        Command::Run { experiment, config, seed, workers, out } => {
            match run(&experiment, config.as_deref(), seed, workers, out.as_deref()) {
                Ok(code) => exit(code),
                Err(err) => {
                    eprintln!("excloop: error: {err:#}");
                    exit(1);
                }
            }
        }
    }
}

fn run(
    experiment: &str,
    config_path: Option<&std::path::Path>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<&std::path::Path>,
) -> Result<i32> {
    // resolve and validate the whole configuration before touching any
    // output path, so a bad invocation never leaves a file behind
    let mut cfg: ExperimentConfig = ExperimentConfig::defaults_for(experiment)?;
    if let Some(path) = config_path {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_file(&text)
            .with_context(|| format!("config {}", path.display()))?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    if let Some(out) = out {
        cfg.out = Some(out.display().to_string());
    }

    // provenance: the effective configuration, in config-file syntax
    eprintln!("# excloop {} effective configuration", env!("CARGO_PKG_VERSION"));
    eprint!("{}", cfg.serialize());

    let rows = experiments::run_experiment(&cfg)?;
    if rows.is_empty() {
        bail!("experiment '{}' produced no report rows", cfg.experiment);
    }
    let mut buf = Vec::new();
    report::emit_report(&rows, &mut buf)?;
    match &cfg.out {
        Some(path) => fs::write(path, &buf)
            .with_context(|| format!("writing report {path}"))?,
        None => io::stdout().write_all(&buf)?,
    }
    Ok(report::exit_code(&rows))
}
