//! Model-level explanations for heterogeneous graph classifiers.
//!
//! Candidate explanation graphs are synthesized with discrete denoising
//! diffusion (one structure model per graph size, one feature model per
//! node type and class), filtered against the dataset metagraph, and scored
//! by the classifier under explanation. The highest-scoring candidate per
//! class is the explanation.
//!
//! Module map:
//!
//! - [`graph`]: heterogeneous graph type, metagraph, structural statistics,
//!   typed subgraph containment.
//! - [`datasets`]: synthetic generators, forest-fire sampling, corpora,
//!   feature selection and the graph document format.
//! - [`neural`]: dense matrices, hand-differentiated layers, Adam.
//! - [`graph_diffusion`]: marginal-transition diffusion over node types and
//!   edges with a graph-transformer denoiser.
//! - [`feature_diffusion`]: discrete (and Gaussian) diffusion over node
//!   feature rows.
//! - [`gnn`]: the heterogeneous message-passing classifier.
//! - [`explainer`]: candidate generation and per-class selection.
//! - [`evaluation`]: MMD, cosine realism, faithfulness, Louvain motifs.

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod explainer;
pub mod feature_diffusion;
pub mod graph;
pub mod gnn;
pub mod graph_diffusion;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{FeatureMatrix, HeteroGraph, Metagraph, NodeId};
