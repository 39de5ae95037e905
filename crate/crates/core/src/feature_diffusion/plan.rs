//! Which feature generators a dataset needs, and the training rows of each.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::graph::{FeatureKind, FeatureMatrix, HeteroGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScope {
    All,
    Class(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Discrete,
    Continuous,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub node_type: String,
    pub scope: ClassScope,
    pub kind: GeneratorKind,
    pub width: usize,
    /// Alphabet of discrete entries; empty otherwise.
    pub alphabet: Vec<i64>,
}

impl GeneratorEntry {
    /// Artifact suffix: `<type>` or `<type>_class<c>`.
    pub fn artifact_suffix(&self) -> String {
        match self.scope {
            ClassScope::All => self.node_type.clone(),
            ClassScope::Class(c) => format!("{}_class{c}", self.node_type),
        }
    }
}

/// One entry per class for the classified type, one shared entry for every
/// other featured type, and a `None` entry for featureless types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGeneratorPlan {
    pub entries: Vec<GeneratorEntry>,
}

impl FeatureGeneratorPlan {
    /// Entries that actually train a model.
    pub fn generators(&self) -> impl Iterator<Item = &GeneratorEntry> {
        self.entries.iter().filter(|e| e.kind != GeneratorKind::None)
    }

    pub fn entry(&self, node_type: &str, scope: ClassScope) -> Option<&GeneratorEntry> {
        self.entries
            .iter()
            .find(|e| e.node_type == node_type && e.scope == scope)
    }
}

/// Kind, width and pooled alphabet of each type's features across graphs.
fn type_signatures(graphs: &[HeteroGraph]) -> Result<BTreeMap<String, (FeatureKind, usize, Vec<i64>)>> {
    let mut out: BTreeMap<String, (FeatureKind, usize, Vec<i64>)> = BTreeMap::new();
    for g in graphs {
        for (ty, m) in g.features() {
            let alphabet = m.alphabet().map(<[i64]>::to_vec).unwrap_or_default();
            match out.get_mut(ty) {
                None => {
                    out.insert(ty.clone(), (m.kind(), m.width(), alphabet));
                }
                Some((kind, width, alpha)) => {
                    if *kind != m.kind() || *width != m.width() {
                        return Err(Error::InvalidFeatures {
                            ty: ty.clone(),
                            reason: "feature kind or width differs between graphs".into(),
                        });
                    }
                    alpha.extend(alphabet);
                    alpha.sort_unstable();
                    alpha.dedup();
                }
            }
        }
    }
    Ok(out)
}

fn node_class(g: &HeteroGraph, pos: usize, task: Task) -> Option<usize> {
    match task {
        Task::NodeClassification => g.label(g.nodes()[pos].id),
        Task::GraphClassification => g.graph_label(),
    }
}

pub fn plan_generators(spec: &DatasetSpec, graphs: &[HeteroGraph]) -> Result<FeatureGeneratorPlan> {
    spec.validate()?;
    let signatures = type_signatures(graphs)?;
    let mut entries = Vec::new();
    for ty in &spec.metagraph.types {
        let (kind, width, alphabet) = match signatures.get(ty) {
            Some((_, 0, _)) | None => (GeneratorKind::None, 0, Vec::new()),
            Some((FeatureKind::Discrete, w, a)) => (GeneratorKind::Discrete, *w, a.clone()),
            Some((FeatureKind::Continuous, w, _)) => (GeneratorKind::Continuous, *w, Vec::new()),
        };
        if ty == &spec.classified_type && kind != GeneratorKind::None {
            let labeled = graphs.iter().any(|g| {
                g.positions_of_type(ty)
                    .into_iter()
                    .any(|p| node_class(g, p, spec.task).is_some())
            });
            if !labeled {
                return Err(Error::InvalidArgument(format!(
                    "classified type `{ty}` has no labeled nodes"
                )));
            }
            for c in 0..spec.num_classes {
                entries.push(GeneratorEntry {
                    node_type: ty.clone(),
                    scope: ClassScope::Class(c),
                    kind,
                    width,
                    alphabet: alphabet.clone(),
                });
            }
        } else {
            entries.push(GeneratorEntry {
                node_type: ty.clone(),
                scope: ClassScope::All,
                kind,
                width,
                alphabet,
            });
        }
    }
    Ok(FeatureGeneratorPlan { entries })
}

/// Feature rows an entry trains on: every row of its type, or only rows of
/// nodes in the entry's class.
pub fn training_rows(entry: &GeneratorEntry, spec: &DatasetSpec, graphs: &[HeteroGraph]) -> Result<FeatureMatrix> {
    let mut parts = Vec::new();
    for g in graphs {
        let Some(m) = g.feature(&entry.node_type) else { continue };
        let rows: Vec<usize> = g
            .positions_of_type(&entry.node_type)
            .into_iter()
            .filter(|&p| match entry.scope {
                ClassScope::All => true,
                ClassScope::Class(c) => node_class(g, p, spec.task) == Some(c),
            })
            .map(|p| g.feature_row(p))
            .collect();
        parts.push(m.select_rows(&rows));
    }
    if parts.is_empty() {
        return Err(Error::Empty(format!("no feature rows for type `{}`", entry.node_type)));
    }
    let merged = FeatureMatrix::concat(&parts.iter().collect::<Vec<_>>())?;
    if entry.kind == GeneratorKind::Discrete {
        // pooled alphabet, so every class model shares one state space
        let rows = (0..merged.n_rows())
            .map(|i| merged.discrete_row(i).unwrap().to_vec())
            .collect();
        return FeatureMatrix::discrete(entry.alphabet.clone(), entry.width, rows);
    }
    Ok(merged)
}
