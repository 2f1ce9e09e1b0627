//! `envqueue` — reproducible experiment driver for queues in interactive
//! random environments.
//!
//! Exit codes: 0 all assertions passed, 1 an assertion failed, 2 config
//! error, 3 runtime failure.

// `!(x > y)` guards also catch NaN, unlike `x <= y`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use experiments::ExpError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "envqueue",
    version,
    about = "Queues in interactive random environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
        /// Output directory (overrides the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root seed (overrides `run.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Replica count (overrides `run.replicas`).
        #[arg(long)]
        replicas: Option<u32>,
    },
    /// Parse and range-check a config without running it.
    Validate { config: PathBuf },
    /// Print the catalog of named builtin environments.
    ListBuiltins,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExpError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExpError::Config(format!("cannot read {path:?}: {e}")))?;
    ExperimentConfig::parse(&text).map_err(|e| ExpError::Config(e.0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins => {
            print!("{}", experiments::list_builtins());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("ok: kind={} hash={}", cfg.kind, cfg.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            out,
            seed,
            replicas,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(r) = replicas {
                cfg.run.replicas = r;
                if let Err(e) = cfg.validate() {
                    eprintln!("config error: {}", e.0);
                    return ExitCode::from(2);
                }
            }
            let out_dir = out
                .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            match experiments::run_experiment(&cfg, &out_dir) {
                Ok(outcome) => {
                    for a in &outcome.assertions {
                        println!(
                            "[{}] {}: {}",
                            if a.passed { "PASS" } else { "FAIL" },
                            a.name,
                            a.detail
                        );
                    }
                    for p in &outcome.artifacts {
                        println!("wrote {}", p.display());
                    }
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e @ ExpError::Config(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e @ ExpError::Runtime(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
