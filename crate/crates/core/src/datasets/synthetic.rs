//! Synthetic benchmark graphs with planted motifs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{HeteroGraph, NodeId};

/// Node type used by every synthetic generator.
pub const SYNTHETIC_TYPE: &str = "node";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    House,
    Cycle(usize),
    /// `n × n` grid.
    Grid(usize),
}

impl Motif {
    pub fn node_count(&self) -> usize {
        match *self {
            Motif::House => 5,
            Motif::Cycle(n) => n,
            Motif::Grid(n) => n * n,
        }
    }

    /// Motif edges over local indices `0..node_count`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match *self {
            // 0 apex, 1-2 middle, 3-4 bottom
            Motif::House => vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)],
            Motif::Cycle(n) => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Motif::Grid(n) => {
                let mut e = Vec::new();
                for r in 0..n {
                    for c in 0..n {
                        let i = r * n + c;
                        if c + 1 < n {
                            e.push((i, i + 1));
                        }
                        if r + 1 < n {
                            e.push((i, i + n));
                        }
                    }
                }
                e
            }
        }
    }

    /// The motif as a standalone homogeneous graph on ids `0..node_count`.
    pub fn graph(&self) -> HeteroGraph {
        let edges: Vec<(NodeId, NodeId)> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (u as NodeId, v as NodeId))
            .collect();
        HeteroGraph::from_edges(self.node_count(), SYNTHETIC_TYPE, &edges).expect("motif edges are valid")
    }
}

/// Barabási–Albert graph with one edge per new node, grown from a single edge.
fn barabasi_albert<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HeteroGraph {
    let mut g = HeteroGraph::new();
    let mut targets: Vec<NodeId> = Vec::new();
    for i in 0..n as NodeId {
        g.add_node(i, SYNTHETIC_TYPE).unwrap();
        if i == 1 {
            g.add_edge(0, 1).unwrap();
            targets.extend([0, 1]);
        } else if i > 1 {
            // degree-proportional choice: each endpoint occurrence is one ticket
            let t = targets[rng.random_range(0..targets.len())];
            g.add_edge(i, t).unwrap();
            targets.extend([i, t]);
        }
    }
    g
}

/// Append `motif` to `g`, label its nodes with `labels`, and connect its
/// node `anchor` to `base`.
fn attach_motif(g: &mut HeteroGraph, motif: Motif, labels: &[usize], anchor: usize, base: NodeId) {
    let offset = g.node_count() as NodeId;
    for i in 0..motif.node_count() {
        let id = offset + i as NodeId;
        g.add_node(id, SYNTHETIC_TYPE).unwrap();
        g.set_label(id, labels[i]).unwrap();
    }
    for (u, v) in motif.edges() {
        g.add_edge(offset + u as NodeId, offset + v as NodeId).unwrap();
    }
    g.add_edge(offset + anchor as NodeId, base).unwrap();
}

/// BA base with house motifs hung off random base nodes by their bottom
/// corner. Labels: base 0, apex 1, middle 2, bottom 3.
pub fn gen_ba_shapes<R: Rng + ?Sized>(base_nodes: usize, num_motifs: usize, rng: &mut R) -> HeteroGraph {
    let mut g = barabasi_albert(base_nodes.max(1), rng);
    for i in 0..base_nodes as NodeId {
        g.set_label(i, 0).unwrap();
    }
    for _ in 0..num_motifs {
        let base = rng.random_range(0..base_nodes as NodeId);
        attach_motif(&mut g, Motif::House, &[1, 2, 2, 3, 3], 3, base);
    }
    g
}

/// Balanced binary tree with `depth` levels below the root
/// (`2^(depth+1) - 1` nodes) and motifs attached at random tree nodes.
/// Labels: tree 0, motif 1.
pub fn gen_tree_motif<R: Rng + ?Sized>(depth: usize, motif: Motif, num_motifs: usize, rng: &mut R) -> HeteroGraph {
    let n = (1usize << (depth + 1)) - 1;
    let mut g = HeteroGraph::new();
    for i in 0..n as NodeId {
        g.add_node(i, SYNTHETIC_TYPE).unwrap();
        g.set_label(i, 0).unwrap();
        if i > 0 {
            g.add_edge(i, (i - 1) / 2).unwrap();
        }
    }
    let labels = vec![1; motif.node_count()];
    for _ in 0..num_motifs {
        let base = rng.random_range(0..n as NodeId);
        attach_motif(&mut g, motif, &labels, 0, base);
    }
    g
}

/// The three motif classes of the graph-classification benchmark, in label
/// order.
pub const BA3_MOTIFS: [Motif; 3] = [Motif::House, Motif::Cycle(6), Motif::Grid(3)];
/// Size of the BA base of each benchmark graph.
pub const BA3_BASE_NODES: usize = 20;

/// Graphs of a BA base plus one motif; the graph label is the motif index in
/// [`BA3_MOTIFS`]. Labels cycle through the classes so counts stay balanced,
/// then the order is shuffled.
pub fn gen_ba3motif<R: Rng + ?Sized>(num_graphs: usize, rng: &mut R) -> Vec<HeteroGraph> {
    let mut labels: Vec<usize> = (0..num_graphs).map(|i| i % 3).collect();
    labels.shuffle(rng);
    labels
        .into_iter()
        .map(|label| {
            let mut g = barabasi_albert(BA3_BASE_NODES, rng);
            let motif = BA3_MOTIFS[label];
            let base = rng.random_range(0..BA3_BASE_NODES as NodeId);
            let offset = g.node_count() as NodeId;
            for i in 0..motif.node_count() {
                g.add_node(offset + i as NodeId, SYNTHETIC_TYPE).unwrap();
            }
            for (u, v) in motif.edges() {
                g.add_edge(offset + u as NodeId, offset + v as NodeId).unwrap();
            }
            g.add_edge(offset, base).unwrap();
            g.set_graph_label(Some(label));
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{contains_subgraph, is_connected};
    use crate::rng::seeded;

    #[test]
    fn ba_without_motifs_is_a_labeled_tree() {
        let g = gen_ba_shapes(30, 0, &mut seeded(1));
        assert_eq!(g.node_count(), 30);
        assert_eq!(g.edge_count(), 29);
        assert!(is_connected(&g));
        assert!(g.labels().values().all(|&l| l == 0));
    }

    #[test]
    fn one_house() {
        let g = gen_ba_shapes(5, 1, &mut seeded(2));
        assert_eq!(g.node_count(), 10);
        assert!(contains_subgraph(&g, &Motif::House.graph()));
        let mut hist = [0; 4];
        for &l in g.labels().values() {
            hist[l] += 1;
        }
        assert_eq!(hist, [5, 1, 2, 2]);
    }

    #[test]
    fn tree_motifs() {
        let tree = gen_tree_motif(3, Motif::Cycle(6), 0, &mut seeded(3));
        assert_eq!(tree.node_count(), 15);
        assert_eq!(tree.edge_count(), 14);
        let with_cycle = gen_tree_motif(3, Motif::Cycle(6), 1, &mut seeded(3));
        assert!(contains_subgraph(&with_cycle, &Motif::Cycle(6).graph()));
        assert!(!contains_subgraph(&tree, &Motif::Cycle(6).graph()));
        let grid = gen_tree_motif(3, Motif::Grid(3), 1, &mut seeded(4));
        assert_eq!(grid.labels().values().filter(|&&l| l == 1).count(), 9);
        assert!(is_connected(&grid));
    }

    #[test]
    fn ba3motif_balanced_and_contains_motif() {
        let graphs = gen_ba3motif(3, &mut seeded(5));
        let mut labels: Vec<usize> = graphs.iter().map(|g| g.graph_label().unwrap()).collect();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2]);
        for g in gen_ba3motif(20, &mut seeded(6)) {
            let l = g.graph_label().unwrap();
            assert!(l < 3);
            assert!(contains_subgraph(&g, &BA3_MOTIFS[l].graph()));
            assert!(is_connected(&g));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = serde_json::to_string(&gen_ba_shapes(40, 4, &mut seeded(9))).unwrap();
        let b = serde_json::to_string(&gen_ba_shapes(40, 4, &mut seeded(9))).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            gen_tree_motif(4, Motif::Grid(3), 2, &mut seeded(1)),
            gen_tree_motif(4, Motif::Grid(3), 2, &mut seeded(1))
        );
        assert_eq!(gen_ba3motif(6, &mut seeded(2)), gen_ba3motif(6, &mut seeded(2)));
    }
}
