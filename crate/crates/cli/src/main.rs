//! `midipose {synth|train|eval|infer|gradcheck}`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "midipose", version, about = "Pose estimation from multi-RRU 5G CSI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for both the scene and training (beats MIDIPOSE_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model and write its checkpoint and loss log.
    Train {
        #[command(flatten)]
        common: Common,
        /// midipose or baseline.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        /// random or temporal.
        #[arg(long)]
        split: Option<String>,
    },
    /// PCK tables for one or more checkpoints.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoints to compare; defaults to paths.checkpoint.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        split: Option<String>,
    },
    /// Print the predicted keypoints for one CSI frame.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// CSI frame index in the dataset.
        #[arg(long)]
        index: usize,
    },
    /// Finite-difference check of every layer and both models.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Scale analytic gradients by 1.01 so every check must fail.
        #[arg(long)]
        inject_fault: bool,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration.
    Usage(String),
    /// Anything that goes wrong while running.
    Runtime(String),
    /// A check ran and reported failure.
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl From<midipose::Error> for Failure {
    fn from(e: midipose::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::load(&text, &common.overrides).map_err(Failure::Usage)?;
    if let Ok(s) = std::env::var("MIDIPOSE_SEED") {
        let seed = s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("MIDIPOSE_SEED {s:?} is not an unsigned integer")))?;
        cfg.set_seed(seed);
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn with_overrides(common: &Common, extra: Vec<String>) -> Result<RunConfig, Failure> {
    let mut all = common.overrides.clone();
    all.extend(extra);
    load_config(&Common {
        config: common.config.clone(),
        overrides: all,
        seed: common.seed,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { common } => commands::synth(&load_config(&common)?),
        Command::Train {
            common,
            model,
            epochs,
            split,
        } => {
            let mut extra = Vec::new();
            if let Some(m) = model {
                extra.push(format!("train.model=\"{m}\""));
            }
            if let Some(e) = epochs {
                extra.push(format!("train.epochs={e}"));
            }
            if let Some(s) = split {
                extra.push(format!("train.split=\"{s}\""));
            }
            commands::train(&with_overrides(&common, extra)?)
        }
        Command::Eval {
            common,
            checkpoint,
            split,
        } => {
            let extra = split.map(|s| format!("eval.split=\"{s}\"")).into_iter().collect();
            let cfg = with_overrides(&common, extra)?;
            let ckpts = if checkpoint.is_empty() {
                vec![cfg.paths.checkpoint.clone()]
            } else {
                checkpoint
            };
            commands::eval(&cfg, &ckpts)
        }
        Command::Infer {
            common,
            checkpoint,
            index,
        } => {
            let cfg = load_config(&common)?;
            let ckpt = checkpoint.unwrap_or_else(|| cfg.paths.checkpoint.clone());
            commands::infer(&cfg, &ckpt, index)
        }
        Command::Gradcheck {
            common,
            seeds,
            inject_fault,
        } => commands::gradcheck(&load_config(&common)?, seeds, inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Runtime(m) | Failure::Check(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
