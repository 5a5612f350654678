//! `tailmine` — long-tail mining pipeline runner.
//!
//! Subcommands wire the stages into reproducible runs:
//! `describe` -> `keywords` -> `score` -> `mine` -> `eval`.
//!
//! Exit codes: 0 success, 1 partial (some examples failed and were
//! recorded), 2 configuration or input error.

mod commands;
mod config;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{BackendChoice, KeywordModeChoice, RunConfig};

#[derive(Parser)]
#[command(name = "tailmine", version, about = "Long-tail data mining pipeline")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for attachments, selections, and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Root seed for all run randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Completion backend.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obtain per-media descriptions for every example in the manifest.
    Describe {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Describe-stage prompt template name.
        #[arg(long)]
        template: Option<String>,
    },
    /// Turn descriptions into normalized keyword sets.
    Keywords {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<KeywordModeChoice>,
        /// Apply the category filter after extraction.
        #[arg(long)]
        filter: bool,
    },
    /// Compute novelty signals and write one CSV per signal.
    Score {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated signal names.
        #[arg(long, value_delimiter = ',')]
        signals: Option<Vec<String>>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Select a labeling budget from the score CSVs.
    Mine {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        method: Option<tailmine::selection::SelectionMethod>,
        /// Number of examples to select (must be positive).
        #[arg(long, allow_hyphen_values = true)]
        budget: Option<i64>,
        /// Signal column for top-k.
        #[arg(long)]
        column: Option<String>,
    },
    /// Report rareness distributions and signal correlations.
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Mined-set CSV (defaults to <out_dir>/mined.csv).
        #[arg(long)]
        mined: Option<PathBuf>,
        #[arg(long)]
        tail_threshold: Option<u32>,
        /// Run the synthetic benchmark instead of evaluating a corpus.
        #[arg(long)]
        synthetic: bool,
    },
}

/// Outcome of a command that completed without a hard error.
pub enum Outcome {
    Success,
    /// Some examples failed and were recorded; outputs for the rest exist.
    Partial,
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out_dir) = &cli.out_dir {
        config.out_dir = out_dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(backend) = cli.backend {
        config.backend.kind = backend;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let mut config = resolve_config(&cli)?;
    match &cli.command {
        Command::Describe { manifest, template } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(t) = template {
                config.describe.template = t.clone();
            }
            commands::describe::run(&config)
        }
        Command::Keywords {
            manifest,
            mode,
            filter,
        } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(mode) = mode {
                config.keywords.mode = *mode;
            }
            if *filter {
                config.keywords.filter = true;
            }
            commands::keywords::run(&config)
        }
        Command::Score {
            manifest,
            signals,
            predictions,
        } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(signals) = signals {
                config.score.signals = signals.clone();
            }
            if let Some(p) = predictions {
                config.score.predictions = Some(p.clone());
            }
            commands::score::run(&config)
        }
        Command::Mine {
            manifest,
            method,
            budget,
            column,
        } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(method) = method {
                config.mine.method = *method;
            }
            if let Some(budget) = budget {
                if *budget <= 0 {
                    anyhow::bail!("budget must be positive, got {budget}");
                }
                config.mine.budget = *budget as usize;
            }
            if let Some(column) = column {
                config.mine.column = Some(column.clone());
            }
            commands::mine::run(&config)
        }
        Command::Eval {
            manifest,
            mined,
            tail_threshold,
            synthetic,
        } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(mined) = mined {
                config.eval.mined = Some(mined.clone());
            }
            if let Some(threshold) = tail_threshold {
                config.eval.tail_threshold = *threshold;
            }
            if *synthetic && config.eval.synthetic.is_none() {
                config.eval.synthetic = Some(Default::default());
            }
            commands::eval::run(&config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
