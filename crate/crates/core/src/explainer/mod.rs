//! Candidate generation across graph sizes and per-class selection of the
//! highest-scoring candidate as the explanation.

mod candidates;
mod select;

pub use candidates::{generate_candidates, Candidate, CandidateSet, PipelineCounts};
pub use select::{
    score_candidates, select_explanations, select_from_scores, select_graph_explanations,
    select_node_explanations, top_k_explanations, top_k_from_scores, ClassExplanation, ExplanationReport,
    ScoredSite, Selection,
};
