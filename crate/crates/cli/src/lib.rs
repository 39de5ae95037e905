//! Stage-by-stage command-line pipeline: sample real graphs, train the
//! structure, feature and classifier models, generate and select
//! explanations, and evaluate them. Artifacts are JSON files in one output
//! directory; each stage records a manifest so unchanged reruns are no-ops.

pub mod config;
pub mod error;
pub mod stages;
pub mod store;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use stages::{run_stage, Outcome, RunOptions, Stage};

#[derive(Debug, Parser)]
#[command(name = "diffexplain", version, about = "Model-level GNN explanations from graph diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat generation, selection and evaluation with derived seeds.
    #[arg(long, global = true, default_value_t = 1)]
    pub runs: usize,
    /// Rerun the stage even if its manifest is current.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Build the training and held-out corpora from the dataset.
    Sample,
    /// Train one structure denoiser per graph size.
    TrainGraph,
    /// Train the node-feature generators.
    TrainFeat,
    /// Train the classifier under explanation.
    TrainGnn,
    /// Generate candidates and select one explanation per class.
    Explain,
    /// Score explanations and candidates against held-out real graphs.
    Evaluate,
}

impl Command {
    pub fn stage(self) -> Stage {
        match self {
            Command::Sample => Stage::Sample,
            Command::TrainGraph => Stage::TrainGraph,
            Command::TrainFeat => Stage::TrainFeat,
            Command::TrainGnn => Stage::TrainGnn,
            Command::Explain => Stage::Explain,
            Command::Evaluate => Stage::Evaluate,
        }
    }
}

/// Resolve the configuration with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli.config.clone().ok_or_else(|| CliError::Config {
        path: PathBuf::from("--config"),
        reason: "a configuration file is required".into(),
    })?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let config = resolve_config(cli)?;
    let opts = RunOptions {
        runs: cli.runs,
        force: cli.force,
    };
    run_stage(&config, cli.command.stage(), &opts)
}
