use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeId};

/// Dense categorical view of a fixed-size graph: one type index per node and
/// a symmetric 0/1 adjacency with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGraphState {
    pub node_types: Vec<usize>,
    adjacency: Vec<u8>,
}

impl DenseGraphState {
    pub fn empty(n: usize) -> Self {
        Self {
            node_types: vec![0; n],
            adjacency: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.node_types.len()
    }

    pub fn edge(&self, i: usize, j: usize) -> u8 {
        self.adjacency[i * self.n() + j]
    }

    /// Sets both `(i, j)` and `(j, i)`; the diagonal stays empty.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        if i == j {
            return;
        }
        let n = self.n();
        let v = present as u8;
        self.adjacency[i * n + j] = v;
        self.adjacency[j * n + i] = v;
    }

    pub fn degrees(&self) -> Vec<usize> {
        let n = self.n();
        (0..n)
            .map(|i| self.adjacency[i * n..(i + 1) * n].iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn from_graph(g: &HeteroGraph, vocab: &[String]) -> Result<Self> {
        let mut state = Self::empty(g.node_count());
        for (p, node) in g.nodes().iter().enumerate() {
            state.node_types[p] = vocab
                .iter()
                .position(|t| t == &node.ty)
                .ok_or_else(|| Error::InvalidArgument(format!("type `{}` not in vocabulary", node.ty)))?;
        }
        for &(u, v) in g.edges() {
            state.set_edge(g.position(u).unwrap(), g.position(v).unwrap(), true);
        }
        Ok(state)
    }

    /// Node ids `0..n`, types from `vocab`, edges from the upper triangle.
    pub fn to_graph(&self, vocab: &[String]) -> HeteroGraph {
        let mut g = HeteroGraph::new();
        for (i, &t) in self.node_types.iter().enumerate() {
            g.add_node(i as NodeId, &vocab[t]).expect("fresh ids");
        }
        let n = self.n();
        for i in 0..n {
            for j in i + 1..n {
                if self.edge(i, j) == 1 {
                    g.add_edge(i as NodeId, j as NodeId).expect("valid pair");
                }
            }
        }
        g
    }
}
