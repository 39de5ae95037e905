//! Metrics for generated candidates and explanations: MMD over graph
//! statistics, feature cosine realism, predictive and ground-truth
//! faithfulness, and Louvain-based motif extraction.

mod faithfulness;
mod louvain;
mod mmd;
mod motifs;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use faithfulness::{feature_cosine, ground_truth_faithfulness, predictive_faithfulness};
pub use louvain::{louvain_communities, Louvain, MIN_GAIN};
pub use mmd::{histograms, mmd, ntd_mmd, total_variation, GraphStatistic, MmdConfig};
pub use motifs::{extract_motifs, MotifSet, DEFAULT_MAX_MOTIFS};

use crate::error::Result;
use crate::explainer::ExplanationReport;
use crate::graph::{FeatureMatrix, HeteroGraph};

/// Structural MMD between a generated and a real graph corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusComparison {
    pub degree: f64,
    pub clustering: f64,
    pub spectrum: f64,
    pub node_types: f64,
}

pub fn compare_corpora(generated: &[HeteroGraph], real: &[HeteroGraph]) -> Result<CorpusComparison> {
    let stat = |s| mmd(generated, real, &MmdConfig::new(s));
    Ok(CorpusComparison {
        degree: stat(GraphStatistic::Degree)?,
        clustering: stat(GraphStatistic::Clustering)?,
        spectrum: stat(GraphStatistic::Spectrum)?,
        node_types: stat(GraphStatistic::NodeTypeDistribution)?,
    })
}

fn pooled_rows<'a>(graphs: impl Iterator<Item = &'a HeteroGraph>, ty: &str) -> Result<Option<FeatureMatrix>> {
    let parts: Vec<&FeatureMatrix> = graphs.filter_map(|g| g.feature(ty)).filter(|m| m.n_rows() > 0).collect();
    if parts.is_empty() {
        return Ok(None);
    }
    FeatureMatrix::concat(&parts).map(Some)
}

/// Feature cosine per node type featured (with nonzero width) on both sides.
pub fn feature_cosine_by_type(generated: &[HeteroGraph], real: &[HeteroGraph]) -> Result<BTreeMap<String, f64>> {
    let mut types: Vec<String> = generated.iter().flat_map(|g| g.features().keys().cloned()).collect();
    types.sort();
    types.dedup();
    let mut out = BTreeMap::new();
    for ty in types {
        let (Some(a), Some(b)) = (pooled_rows(generated.iter(), &ty)?, pooled_rows(real.iter(), &ty)?) else {
            continue;
        };
        if a.width() > 0 && a.width() == b.width() {
            out.insert(ty, feature_cosine(&a, &b)?);
        }
    }
    Ok(out)
}

/// Metrics attached to an explanation report. Fields without their inputs
/// (motifs, a real corpus) are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub predictive_faithfulness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_faithfulness: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motif_fallback_classes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<CorpusComparison>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feature_cosine: BTreeMap<String, f64>,
}

/// Faithfulness of `report`, plus realism of `generated` against `real`
/// when a real corpus is given.
pub fn evaluate_report(
    report: &ExplanationReport,
    generated: &[HeteroGraph],
    real: &[HeteroGraph],
    motifs: Option<&MotifSet>,
) -> Result<MetricBlock> {
    let (structure, feature_cosine) = if generated.is_empty() || real.is_empty() {
        (None, BTreeMap::new())
    } else {
        (Some(compare_corpora(generated, real)?), feature_cosine_by_type(generated, real)?)
    };
    Ok(MetricBlock {
        predictive_faithfulness: predictive_faithfulness(report)?,
        ground_truth_faithfulness: motifs.map(|m| ground_truth_faithfulness(report, m)).transpose()?,
        motif_fallback_classes: motifs.map(|m| m.fallback.clone()).unwrap_or_default(),
        structure,
        feature_cosine,
    })
}
