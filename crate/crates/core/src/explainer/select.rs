use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidates::{CandidateSet, PipelineCounts};
use crate::datasets::Task;
use crate::error::{Error, Result};
use crate::evaluation::MetricBlock;
use crate::gnn::{predict_graph, HeteroGnn};
use crate::graph::{HeteroGraph, NodeId};

/// Softmax output for one scoring site of a candidate: a classified-type
/// node (node task) or the whole graph (`node == None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSite {
    pub node: Option<NodeId>,
    pub probabilities: Vec<f64>,
}

/// A candidate's best site for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub class: usize,
    pub candidate: usize,
    pub node: Option<NodeId>,
    pub probability: f64,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassExplanation {
    pub class: usize,
    /// Index into the candidate set.
    pub candidate: usize,
    pub node: Option<NodeId>,
    pub probability: f64,
    pub probabilities: Vec<f64>,
    pub graph: HeteroGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub task: Task,
    pub classified_type: String,
    pub explanations: Vec<ClassExplanation>,
    pub counts: PipelineCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricBlock>,
}

impl ExplanationReport {
    pub fn num_classes(&self) -> usize {
        self.explanations.len()
    }
}

/// Score every candidate with the classifier, in parallel.
pub fn score_candidates(candidates: &CandidateSet, model: &HeteroGnn) -> Result<Vec<Vec<ScoredSite>>> {
    candidates
        .candidates
        .par_iter()
        .map(|c| match model.task {
            Task::NodeClassification => Ok(model
                .node_probabilities(&c.graph)?
                .into_iter()
                .map(|(id, p)| ScoredSite {
                    node: Some(id),
                    probabilities: p,
                })
                .collect()),
            Task::GraphClassification => Ok(vec![ScoredSite {
                node: None,
                probabilities: predict_graph(model, &c.graph)?,
            }]),
        })
        .collect()
}

/// Best site of one candidate for `class`; ties go to the lower node id.
fn best_site(sites: &[ScoredSite], class: usize) -> Option<&ScoredSite> {
    sites.iter().reduce(|best, s| {
        match s.probabilities[class].partial_cmp(&best.probabilities[class]) {
            Some(Ordering::Greater) => s,
            Some(Ordering::Equal) if s.node < best.node => s,
            _ => best,
        }
    })
}

fn check_table(scores: &[Vec<ScoredSite>], num_classes: usize) -> Result<()> {
    if num_classes == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    if scores.iter().all(|s| s.is_empty()) {
        return Err(Error::NoCandidates("no candidate has a scoring site".into()));
    }
    if let Some(bad) = scores.iter().flatten().find(|s| s.probabilities.len() != num_classes) {
        return Err(Error::Shape(format!(
            "score vector of length {} for {num_classes} classes",
            bad.probabilities.len()
        )));
    }
    Ok(())
}

/// Per class, the `k` best distinct candidates by their best site, in
/// non-increasing probability; ties go to the lower candidate index.
pub fn top_k_from_scores(scores: &[Vec<ScoredSite>], num_classes: usize, k: usize) -> Result<Vec<Vec<Selection>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    check_table(scores, num_classes)?;
    Ok((0..num_classes)
        .map(|class| {
            let mut ranked: Vec<Selection> = scores
                .iter()
                .enumerate()
                .filter_map(|(candidate, sites)| {
                    best_site(sites, class).map(|s| Selection {
                        class,
                        candidate,
                        node: s.node,
                        probability: s.probabilities[class],
                        probabilities: s.probabilities.clone(),
                    })
                })
                .collect();
            // stable sort keeps candidate order among equal probabilities
            ranked.sort_by(|a, b| b.probability.total_cmp(&a.probability));
            ranked.truncate(k);
            ranked
        })
        .collect())
}

/// Per class, the argmax over candidates and sites of the class probability.
pub fn select_from_scores(scores: &[Vec<ScoredSite>], num_classes: usize) -> Result<Vec<Selection>> {
    Ok(top_k_from_scores(scores, num_classes, 1)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect())
}

fn report(candidates: &CandidateSet, model: &HeteroGnn, task: Task) -> Result<ExplanationReport> {
    if model.task != task {
        return Err(Error::InvalidArgument(format!(
            "classifier task is {:?}, selection needs {task:?}",
            model.task
        )));
    }
    if candidates.is_empty() {
        return Err(Error::NoCandidates("candidate set is empty".into()));
    }
    let scores = score_candidates(candidates, model)?;
    let explanations = select_from_scores(&scores, model.num_classes)?
        .into_iter()
        .map(|s| ClassExplanation {
            class: s.class,
            candidate: s.candidate,
            node: s.node,
            probability: s.probability,
            probabilities: s.probabilities,
            graph: candidates.candidates[s.candidate].graph.clone(),
        })
        .collect();
    Ok(ExplanationReport {
        task,
        classified_type: model.classified_type.clone(),
        explanations,
        counts: candidates.counts,
        metrics: None,
    })
}

/// For each class, the candidate and classified-type node with the highest
/// predicted probability.
pub fn select_node_explanations(candidates: &CandidateSet, model: &HeteroGnn) -> Result<ExplanationReport> {
    report(candidates, model, Task::NodeClassification)
}

/// For each class, the candidate graph with the highest predicted probability.
pub fn select_graph_explanations(candidates: &CandidateSet, model: &HeteroGnn) -> Result<ExplanationReport> {
    report(candidates, model, Task::GraphClassification)
}

/// Dispatch on the classifier's task.
pub fn select_explanations(candidates: &CandidateSet, model: &HeteroGnn) -> Result<ExplanationReport> {
    report(candidates, model, model.task)
}

pub fn top_k_explanations(candidates: &CandidateSet, model: &HeteroGnn, k: usize) -> Result<Vec<Vec<Selection>>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates("candidate set is empty".into()));
    }
    top_k_from_scores(&score_candidates(candidates, model)?, model.num_classes, k)
}
