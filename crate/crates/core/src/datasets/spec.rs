use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Metagraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

/// What a dataset asks the classifier to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub task: Task,
    /// Node type whose nodes carry labels (node task) or that is searched
    /// for the argmax node (both tasks).
    pub classified_type: String,
    pub num_classes: usize,
    pub metagraph: Metagraph,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset `{}` needs at least 2 classes, has {}",
                self.name, self.num_classes
            )));
        }
        if !self.metagraph.types.contains(&self.classified_type) {
            return Err(Error::InvalidArgument(format!(
                "classified type `{}` is not in the metagraph of `{}`",
                self.classified_type, self.name
            )));
        }
        Ok(())
    }
}
