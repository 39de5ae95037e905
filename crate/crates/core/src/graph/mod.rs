//! Heterogeneous graphs `G = (V, E, T, X)` and the structural algorithms the
//! rest of the crate consumes.
//!
//! Graphs are undirected and simple. Nodes carry an id and a type name;
//! edges are stored canonically as `(smaller id, larger id)`. Each node type
//! may own one feature matrix whose rows follow the order in which nodes of
//! that type appear in the node list.

mod document;
mod features;
mod iso;
mod metagraph;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use document::{load_hetero_graph, write_hetero_graph, FeatureDocument, GraphDocument, NodeDocument};
pub use features::{FeatureKind, FeatureMatrix};
pub use iso::{contains_subgraph, is_isomorphic};
pub use metagraph::{extract_metagraph, is_valid_wrt_metagraph, Metagraph};
pub use stats::{
    clustering_coefficients, connected_components, degree_histogram, is_connected,
    laplacian_spectrum, node_type_histogram, normalized_laplacian, Clustering,
};

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub ty: String,
}

#[derive(Debug, Clone, Default)]
pub struct HeteroGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<(NodeId, NodeId)>,
    features: BTreeMap<String, FeatureMatrix>,
    labels: BTreeMap<NodeId, usize>,
    graph_label: Option<usize>,
    position: HashMap<NodeId, usize>,
}

impl PartialEq for HeteroGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.features == other.features
            && self.labels == other.labels
            && self.graph_label == other.graph_label
    }
}

fn canonical(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl HeteroGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Homogeneous graph on ids `0..n` of type `ty` with the given edges.
    pub fn from_edges(n: usize, ty: &str, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut g = Self::new();
        for i in 0..n {
            g.add_node(i as NodeId, ty)?;
        }
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, id: NodeId, ty: &str) -> Result<()> {
        if self.position.contains_key(&id) {
            return Err(Error::DuplicateNode(id));
        }
        if self.features.contains_key(ty) {
            return Err(Error::FeaturesFrozen(ty.to_string()));
        }
        self.position.insert(id, self.nodes.len());
        self.nodes.push(Node {
            id,
            ty: ty.to_string(),
        });
        Ok(())
    }

    /// Append a node with the next free id and return that id.
    pub fn push_node(&mut self, ty: &str) -> Result<NodeId> {
        let id = self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
        self.add_node(id, ty)?;
        Ok(id)
    }

    /// Insert an undirected edge. Returns `false` if it was already present.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        for id in [u, v] {
            if !self.position.contains_key(&id) {
                return Err(Error::UnknownNode(id));
            }
        }
        Ok(self.edges.insert(canonical(u, v)))
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains(&canonical(u, v))
    }

    pub fn set_features(&mut self, ty: &str, matrix: FeatureMatrix) -> Result<()> {
        let count = self.nodes.iter().filter(|n| n.ty == ty).count();
        if matrix.n_rows() != count {
            return Err(Error::InvalidFeatures {
                ty: ty.to_string(),
                reason: format!("{} rows for {} nodes", matrix.n_rows(), count),
            });
        }
        self.features.insert(ty.to_string(), matrix);
        Ok(())
    }

    pub fn remove_features(&mut self, ty: &str) -> Option<FeatureMatrix> {
        self.features.remove(ty)
    }

    pub fn set_label(&mut self, id: NodeId, class: usize) -> Result<()> {
        if !self.position.contains_key(&id) {
            return Err(Error::UnknownNode(id));
        }
        self.labels.insert(id, class);
        Ok(())
    }

    pub fn set_graph_label(&mut self, label: Option<usize>) {
        self.graph_label = label;
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn features(&self) -> &BTreeMap<String, FeatureMatrix> {
        &self.features
    }

    pub fn feature(&self, ty: &str) -> Option<&FeatureMatrix> {
        self.features.get(ty)
    }

    pub fn labels(&self) -> &BTreeMap<NodeId, usize> {
        &self.labels
    }

    pub fn label(&self, id: NodeId) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    pub fn graph_label(&self) -> Option<usize> {
        self.graph_label
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn node_type(&self, id: NodeId) -> Option<&str> {
        self.position(id).map(|p| self.nodes[p].ty.as_str())
    }

    /// Distinct node types in order of first appearance.
    pub fn types(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for n in &self.nodes {
            if seen.insert(n.ty.as_str()) {
                out.push(n.ty.clone());
            }
        }
        out
    }

    /// Positions of nodes with type `ty`, in node order.
    pub fn positions_of_type(&self, ty: &str) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&p| self.nodes[p].ty == ty)
            .collect()
    }

    /// Row of the node at `pos` inside its type's feature matrix.
    pub fn feature_row(&self, pos: usize) -> usize {
        let ty = &self.nodes[pos].ty;
        self.nodes[..pos].iter().filter(|n| &n.ty == ty).count()
    }

    /// Neighbor positions per node position, sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in &self.edges {
            let (pu, pv) = (self.position[&u], self.position[&v]);
            adj[pu].push(pv);
            adj[pv].push(pu);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(u, v) in &self.edges {
            deg[self.position[&u]] += 1;
            deg[self.position[&v]] += 1;
        }
        deg
    }

    /// Dense 0/1 adjacency matrix in node-position order.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.nodes.len();
        let mut a = vec![vec![0u8; n]; n];
        for &(u, v) in &self.edges {
            let (pu, pv) = (self.position[&u], self.position[&v]);
            a[pu][pv] = 1;
            a[pv][pu] = 1;
        }
        a
    }

    /// Subgraph induced on the given node positions. Ids, types, labels and
    /// feature rows are carried over; the graph label is kept.
    pub fn induced_subgraph(&self, positions: &[usize]) -> HeteroGraph {
        let mut keep: Vec<usize> = positions.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut g = HeteroGraph::new();
        for &p in &keep {
            let node = &self.nodes[p];
            g.add_node(node.id, &node.ty).expect("ids unique in source graph");
        }
        for &(u, v) in &self.edges {
            if g.position.contains_key(&u) && g.position.contains_key(&v) {
                g.edges.insert((u, v));
            }
        }
        for (ty, matrix) in &self.features {
            let rows: Vec<usize> = keep
                .iter()
                .filter(|&&p| &self.nodes[p].ty == ty)
                .map(|&p| self.feature_row(p))
                .collect();
            if !rows.is_empty() {
                g.features.insert(ty.clone(), matrix.select_rows(&rows));
            }
        }
        for (&id, &c) in &self.labels {
            if g.position.contains_key(&id) {
                g.labels.insert(id, c);
            }
        }
        g.graph_label = self.graph_label;
        g
    }

    /// Check every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        for &(u, v) in &self.edges {
            if u >= v {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) not in canonical order"
                )));
            }
            for id in [u, v] {
                if !self.position.contains_key(&id) {
                    return Err(Error::UnknownNode(id));
                }
            }
        }
        for (ty, m) in &self.features {
            let count = self.nodes.iter().filter(|n| &n.ty == ty).count();
            if m.n_rows() != count {
                return Err(Error::InvalidFeatures {
                    ty: ty.clone(),
                    reason: format!("{} rows for {} nodes", m.n_rows(), count),
                });
            }
            m.validate().map_err(|reason| Error::InvalidFeatures {
                ty: ty.clone(),
                reason,
            })?;
        }
        for id in self.labels.keys() {
            if !self.position.contains_key(id) {
                return Err(Error::UnknownNode(*id));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn cycle(n: usize) -> HeteroGraph {
        let edges: Vec<_> = (0..n as NodeId)
            .map(|i| (i, (i + 1) % n as NodeId))
            .collect();
        HeteroGraph::from_edges(n, "node", &edges).unwrap()
    }

    pub fn complete(n: usize) -> HeteroGraph {
        let mut edges = Vec::new();
        for i in 0..n as NodeId {
            for j in i + 1..n as NodeId {
                edges.push((i, j));
            }
        }
        HeteroGraph::from_edges(n, "node", &edges).unwrap()
    }

    #[test]
    fn edges_are_canonical_and_deduplicated() {
        let mut g = HeteroGraph::from_edges(3, "a", &[]).unwrap();
        assert!(g.add_edge(2, 0).unwrap());
        assert!(!g.add_edge(0, 2).unwrap());
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 2)]);
        assert!(matches!(g.add_edge(1, 1), Err(Error::SelfLoop(1))));
        assert!(matches!(g.add_edge(1, 7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn feature_rows_must_match_type_count() {
        let mut g = HeteroGraph::new();
        g.add_node(0, "a").unwrap();
        g.add_node(1, "b").unwrap();
        g.add_node(2, "a").unwrap();
        let bad = FeatureMatrix::continuous(1, vec![vec![0.0]]).unwrap();
        assert!(g.set_features("a", bad).is_err());
        let ok = FeatureMatrix::continuous(1, vec![vec![0.0], vec![1.0]]).unwrap();
        g.set_features("a", ok).unwrap();
        assert_eq!(g.feature_row(2), 1);
        assert!(matches!(g.add_node(3, "a"), Err(Error::FeaturesFrozen(_))));
    }

    #[test]
    fn induced_subgraph_keeps_feature_rows() {
        let mut g = HeteroGraph::new();
        for (i, ty) in ["a", "b", "a", "a"].iter().enumerate() {
            g.add_node(i as NodeId, ty).unwrap();
        }
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 3).unwrap();
        g.add_edge(2, 3).unwrap();
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        g.set_features("a", FeatureMatrix::continuous(1, rows).unwrap())
            .unwrap();
        g.set_label(3, 1).unwrap();
        let sub = g.induced_subgraph(&[1, 3]);
        assert_eq!(sub.node_count(), 2);
        assert_eq!(sub.edge_count(), 1);
        assert_eq!(sub.feature("a").unwrap().row_f64(0), vec![3.0]);
        assert_eq!(sub.label(3), Some(1));
        sub.validate().unwrap();
    }
}
