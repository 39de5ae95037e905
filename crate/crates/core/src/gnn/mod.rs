//! The classifier under explanation: a heterogeneous message-passing network
//! for node and graph classification.

mod model;
mod train;

pub use model::{predict_graph, predict_node, GnnArchitecture, GnnCache, GnnLayer, HeteroGnn, PreparedGraph, STRUCTURAL_INPUTS};
pub use train::{train_gnn, EpochRecord, TrainConfig, TrainedGnn};
