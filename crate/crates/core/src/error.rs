use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("node type `{0}` already has a feature matrix; add nodes before features")]
    FeaturesFrozen(String),
    #[error("invalid feature matrix for type `{ty}`: {reason}")]
    InvalidFeatures { ty: String, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph document error at {context}: {reason}")]
    Parse { context: String, reason: String },
    #[error("forest-fire sampling failed after {attempts} attempts (target {target} nodes)")]
    SamplingFailed { attempts: usize, target: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("node {node} has type `{found}`, expected `{expected}`")]
    WrongNodeType {
        node: NodeId,
        found: String,
        expected: String,
    },
    #[error("no valid candidates: {0}")]
    NoCandidates(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
