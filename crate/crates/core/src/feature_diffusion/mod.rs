//! Node-feature generation: discrete diffusion for discrete feature types,
//! Gaussian diffusion for continuous ones, organized by a per-type and
//! per-class generator plan.

mod continuous;
mod discrete;
mod plan;

use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use continuous::{discretize, sample_continuous, train_continuous, ContinuousFeatureModel, GaussianSchedule, STD_FLOOR};
pub use discrete::{
    block_softmax, column_cross_entropy, forward_noise_features, reconstruction_loss, sample_discrete,
    train_discrete, DiscreteFeatureModel,
};
pub use plan::{plan_generators, training_rows, ClassScope, FeatureGeneratorPlan, GeneratorEntry, GeneratorKind};

use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, HeteroGraph};
use crate::rng::derive;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureDiffusionConfig {
    pub diffusion_steps: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub dropout: f64,
    pub time_width: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_steps: usize,
}

impl Default for FeatureDiffusionConfig {
    fn default() -> Self {
        Self {
            diffusion_steps: 100,
            hidden: 128,
            blocks: 2,
            dropout: 0.0,
            time_width: 32,
            batch_size: 32,
            learning_rate: 0.05,
            weight_decay: 1e-2,
            train_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuousDiffusionConfig {
    pub diffusion_steps: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub dropout: f64,
    pub time_width: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_steps: usize,
}

impl Default for ContinuousDiffusionConfig {
    fn default() -> Self {
        Self {
            diffusion_steps: 1000,
            hidden: 128,
            blocks: 2,
            dropout: 0.0,
            time_width: 32,
            batch_size: 256,
            learning_rate: 2e-3,
            weight_decay: 1e-4,
            train_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureModel {
    Discrete(DiscreteFeatureModel),
    Continuous(ContinuousFeatureModel),
}

impl FeatureModel {
    pub fn sample<R: RngCore + ?Sized>(&self, count: usize, rng: &mut R) -> Result<FeatureMatrix> {
        match self {
            FeatureModel::Discrete(m) => sample_discrete(m, count, rng),
            FeatureModel::Continuous(m) => sample_continuous(m, count, rng),
        }
    }
}

/// Trained generators of a plan, keyed by artifact suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBank {
    pub plan: FeatureGeneratorPlan,
    pub classified_type: String,
    pub models: BTreeMap<String, FeatureModel>,
}

impl FeatureBank {
    /// Train every generator of `plan` concurrently; entry `i` is seeded
    /// from `(seed, i)`.
    pub fn train(
        plan: &FeatureGeneratorPlan,
        spec: &DatasetSpec,
        graphs: &[HeteroGraph],
        discrete: &FeatureDiffusionConfig,
        continuous: &ContinuousDiffusionConfig,
        seed: u64,
    ) -> Result<Self> {
        let jobs: Vec<(usize, &GeneratorEntry)> = plan.generators().enumerate().collect();
        let models = jobs
            .par_iter()
            .map(|&(i, entry)| {
                let rows = training_rows(entry, spec, graphs)?;
                let s = derive(seed, i as u64).next_u64();
                let model = match entry.kind {
                    GeneratorKind::Discrete => FeatureModel::Discrete(train_discrete(&rows, discrete, s)?),
                    GeneratorKind::Continuous => FeatureModel::Continuous(train_continuous(&rows, continuous, s)?),
                    GeneratorKind::None => unreachable!("filtered by generators()"),
                };
                log::debug!("trained feature generator {}", entry.artifact_suffix());
                Ok((entry.artifact_suffix(), model))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self {
            plan: plan.clone(),
            classified_type: spec.classified_type.clone(),
            models,
        })
    }

    /// Fill every featured type of `g` with fresh rows, one per node. Nodes
    /// of the classified type draw from the generator of `class`.
    pub fn attach<R: RngCore + ?Sized>(&self, g: &mut HeteroGraph, class: usize, rng: &mut R) -> Result<()> {
        for ty in g.types() {
            let scope = if ty == self.classified_type {
                ClassScope::Class(class)
            } else {
                ClassScope::All
            };
            let Some(entry) = self.plan.entry(&ty, scope) else { continue };
            if entry.kind == GeneratorKind::None {
                continue;
            }
            let model = self
                .models
                .get(&entry.artifact_suffix())
                .ok_or_else(|| Error::InvalidArgument(format!("no trained generator `{}`", entry.artifact_suffix())))?;
            let count = g.positions_of_type(&ty).len();
            g.remove_features(&ty);
            g.set_features(&ty, model.sample(count, rng)?)?;
        }
        Ok(())
    }
}
