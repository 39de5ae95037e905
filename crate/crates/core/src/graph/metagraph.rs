use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::HeteroGraph;

/// Type-level schema: which node types exist and which type pairs may share an edge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metagraph {
    pub types: BTreeSet<String>,
    /// Unordered type pairs, stored with the lexicographically smaller name first.
    pub type_edges: BTreeSet<(String, String)>,
}

impl Metagraph {
    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            types: types.into_iter().map(Into::into).collect(),
            type_edges: BTreeSet::new(),
        }
    }

    /// Adds the type pair (and both types).
    pub fn connect(&mut self, a: &str, b: &str) {
        self.types.insert(a.to_string());
        self.types.insert(b.to_string());
        self.type_edges.insert(type_pair(a, b));
    }

    pub fn allows(&self, a: &str, b: &str) -> bool {
        self.type_edges.contains(&type_pair(a, b))
    }

    pub fn is_subgraph_of(&self, other: &Metagraph) -> bool {
        self.types.is_subset(&other.types) && self.type_edges.is_subset(&other.type_edges)
    }
}

fn type_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn extract_metagraph(g: &HeteroGraph) -> Metagraph {
    let mut m = Metagraph::new(g.nodes().iter().map(|n| n.ty.clone()));
    for &(u, v) in g.edges() {
        let tu = g.node_type(u).expect("edge endpoints exist");
        let tv = g.node_type(v).expect("edge endpoints exist");
        m.type_edges.insert(type_pair(tu, tv));
    }
    m
}

/// A graph is consistent with a schema when its own metagraph is a subgraph of it.
pub fn is_valid_wrt_metagraph(g: &HeteroGraph, m: &Metagraph) -> bool {
    extract_metagraph(g).is_subgraph_of(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::complete;

    fn dblp_like() -> HeteroGraph {
        let mut g = HeteroGraph::new();
        g.add_node(0, "author").unwrap();
        g.add_node(1, "paper").unwrap();
        g.add_node(2, "term").unwrap();
        g.add_node(3, "conference").unwrap();
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        g.add_edge(1, 3).unwrap();
        g
    }

    #[test]
    fn author_paper_pair() {
        let mut g = HeteroGraph::new();
        for (i, ty) in ["author", "paper", "author", "paper"].iter().enumerate() {
            g.add_node(i as u32, ty).unwrap();
        }
        g.add_edge(0, 1).unwrap();
        g.add_edge(2, 3).unwrap();
        let m = extract_metagraph(&g);
        assert_eq!(m.types.len(), 2);
        assert_eq!(m.type_edges.len(), 1);
        assert!(m.allows("paper", "author"));
    }

    #[test]
    fn isolated_node_has_no_type_edges() {
        let mut g = HeteroGraph::new();
        g.add_node(0, "term").unwrap();
        let m = extract_metagraph(&g);
        assert_eq!(m.types.iter().collect::<Vec<_>>(), vec!["term"]);
        assert!(m.type_edges.is_empty());
    }

    #[test]
    fn four_type_star_has_three_type_edges() {
        // enumerate: author-paper, paper-term, paper-conference
        let m = extract_metagraph(&dblp_like());
        assert_eq!(m.type_edges.len(), 3);
    }

    #[test]
    fn validity_checks() {
        let g = dblp_like();
        let m = extract_metagraph(&g);
        assert!(is_valid_wrt_metagraph(&g, &m));

        let mut bad = g.clone();
        bad.add_node(4, "author").unwrap();
        bad.add_edge(0, 4).unwrap();
        assert!(!is_valid_wrt_metagraph(&bad, &m));

        let mut homogeneous = Metagraph::new(["node"]);
        homogeneous.connect("node", "node");
        assert!(is_valid_wrt_metagraph(&complete(4), &homogeneous));
    }
}
