//! Typed subgraph monomorphism by VF2-style backtracking.
//!
//! `contains_subgraph(host, motif)` asks for an injective map from motif nodes
//! to host nodes that preserves node types and sends every motif edge onto a
//! host edge. Extra host edges between mapped nodes are allowed (non-induced).

use std::collections::BTreeMap;

use super::HeteroGraph;

struct Side {
    adj: Vec<Vec<usize>>,
    matrix: Vec<Vec<u8>>,
    types: Vec<usize>,
}

pub fn contains_subgraph(host: &HeteroGraph, motif: &HeteroGraph) -> bool {
    let (m, h) = (motif.node_count(), host.node_count());
    if m > h || motif.edge_count() > host.edge_count() {
        return false;
    }
    if m == 0 {
        return true;
    }

    // Shared type vocabulary; a motif type absent from the host fails fast.
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for node in host.nodes() {
        let next = vocab.len();
        vocab.entry(node.ty.as_str()).or_insert(next);
    }
    let mut host_counts = vec![0usize; vocab.len()];
    let host_types: Vec<usize> = host
        .nodes()
        .iter()
        .map(|n| {
            let t = vocab[n.ty.as_str()];
            host_counts[t] += 1;
            t
        })
        .collect();
    let mut motif_types = Vec::with_capacity(m);
    let mut motif_counts = vec![0usize; vocab.len()];
    for node in motif.nodes() {
        match vocab.get(node.ty.as_str()) {
            Some(&t) => {
                motif_counts[t] += 1;
                motif_types.push(t);
            }
            None => return false,
        }
    }
    if motif_counts.iter().zip(&host_counts).any(|(a, b)| a > b) {
        return false;
    }

    let host = Side {
        adj: host.adjacency(),
        matrix: host.adjacency_matrix(),
        types: host_types,
    };
    let motif = Side {
        adj: motif.adjacency(),
        matrix: motif.adjacency_matrix(),
        types: motif_types,
    };
    let order = matching_order(&motif.adj);
    let mut state = Matcher {
        host: &host,
        motif: &motif,
        order: &order,
        map: vec![usize::MAX; m],
        used: vec![false; h],
    };
    state.extend(0)
}

/// Equal node and edge counts plus a monomorphism imply isomorphism.
pub fn is_isomorphic(a: &HeteroGraph, b: &HeteroGraph) -> bool {
    a.node_count() == b.node_count()
        && a.edge_count() == b.edge_count()
        && contains_subgraph(a, b)
}

/// Visit motif nodes so that each one (after the first of its component) has
/// as many already-placed neighbors as possible; this prunes earliest.
fn matching_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by(|&a, &b| {
                (links[a], adj[a].len())
                    .cmp(&(links[b], adj[b].len()))
                    .then(b.cmp(&a))
            })
            .expect("unplaced node remains");
        placed[next] = true;
        order.push(next);
        for &v in &adj[next] {
            links[v] += 1;
        }
    }
    order
}

struct Matcher<'a> {
    host: &'a Side,
    motif: &'a Side,
    order: &'a [usize],
    map: Vec<usize>,
    used: Vec<bool>,
}

impl Matcher<'_> {
    fn feasible(&self, u: usize, v: usize) -> bool {
        if self.used[v]
            || self.host.types[v] != self.motif.types[u]
            || self.host.adj[v].len() < self.motif.adj[u].len()
        {
            return false;
        }
        self.motif.adj[u].iter().all(|&w| {
            let mapped = self.map[w];
            mapped == usize::MAX || self.host.matrix[mapped][v] == 1
        })
    }

    fn extend(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let u = self.order[depth];
        // Candidates come from the neighborhood of a mapped neighbor when one exists.
        let anchor = self.motif.adj[u]
            .iter()
            .find(|&&w| self.map[w] != usize::MAX)
            .map(|&w| self.map[w]);
        let candidates: Vec<usize> = match anchor {
            Some(a) => self.host.adj[a].clone(),
            None => (0..self.host.types.len()).collect(),
        };
        for v in candidates {
            if !self.feasible(u, v) {
                continue;
            }
            self.map[u] = v;
            self.used[v] = true;
            if self.extend(depth + 1) {
                return true;
            }
            self.map[u] = usize::MAX;
            self.used[v] = false;
        }
        false
    }
}
