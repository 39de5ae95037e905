//! TOML pipeline configuration.

use std::path::{Path, PathBuf};

use diffexplain::datasets::{DatasetSpec, SizeRange, Task, DEFAULT_BURN_PROBABILITY, DEFAULT_MAX_ATTEMPTS};
use diffexplain::evaluation::DEFAULT_MAX_MOTIFS;
use diffexplain::feature_diffusion::{ContinuousDiffusionConfig, FeatureDiffusionConfig};
use diffexplain::gnn::{GnnArchitecture, TrainConfig};
use diffexplain::graph_diffusion::GraphDiffusionConfig;
use diffexplain::Metagraph;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory; relative paths resolve against the working directory.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub graph_diffusion: GraphDiffusionConfig,
    #[serde(default)]
    pub feature_diffusion: FeatureDiffusionConfig,
    #[serde(default)]
    pub continuous_diffusion: ContinuousDiffusionConfig,
    #[serde(default)]
    pub gnn: GnnConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub task: Task,
    pub classified_type: String,
    pub num_classes: usize,
    pub source: DataSource,
    /// Extracted from the source graphs when absent.
    #[serde(default)]
    pub metagraph: Option<Metagraph>,
}

/// Where the real graphs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A graph document, or a JSON array of them, in the datasets format.
    File { path: PathBuf },
    BaShapes { base_nodes: usize, motifs: usize },
    TreeCycle { depth: usize, motifs: usize },
    TreeGrid { depth: usize, motifs: usize },
    Ba3Motif { graphs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub min_size: usize,
    pub max_size: usize,
    /// Training graphs per size.
    pub per_size: usize,
    /// Held-out real graphs per size for evaluation.
    pub held_out_per_size: usize,
    pub burn_probability: f64,
    pub max_attempts: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            min_size: 10,
            max_size: 15,
            per_size: 256,
            held_out_per_size: 32,
            burn_probability: DEFAULT_BURN_PROBABILITY,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    pub architecture: GnnArchitecture,
    pub training: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Candidates generated per graph size.
    pub per_size: usize,
    /// Ranked explanations kept per class in addition to the winner.
    pub top_k: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { per_size: 256, top_k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub per_class_motifs: bool,
    pub max_motifs: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            per_class_motifs: true,
            max_motifs: DEFAULT_MAX_MOTIFS,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Self = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        // file sources are relative to the config file
        if let DataSource::File { path: data } = &mut config.dataset.source {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        config.validate().map_err(|reason| CliError::Config {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        SizeRange::new(self.sampling.min_size, self.sampling.max_size).map_err(|e| e.to_string())?;
        if self.sampling.per_size == 0 || self.explain.per_size == 0 {
            return Err("per_size must be at least 1".into());
        }
        if self.explain.top_k == 0 {
            return Err("top_k must be at least 1".into());
        }
        if self.dataset.name.is_empty() || self.dataset.name.contains(['/', '\\']) {
            return Err(format!("dataset name `{}` is not usable in file names", self.dataset.name));
        }
        Ok(())
    }

    pub fn sizes(&self) -> SizeRange {
        SizeRange {
            min: self.sampling.min_size,
            max: self.sampling.max_size,
        }
    }

    pub fn spec(&self, metagraph: Metagraph) -> DatasetSpec {
        DatasetSpec {
            name: self.dataset.name.clone(),
            task: self.dataset.task,
            classified_type: self.dataset.classified_type.clone(),
            num_classes: self.dataset.num_classes,
            metagraph,
        }
    }
}
