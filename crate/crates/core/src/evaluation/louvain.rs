//! Louvain community detection (resolution 1): local moving of nodes
//! between communities, then aggregation of communities into nodes, until a
//! level no longer raises modularity by more than [`MIN_GAIN`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeId};

pub const MIN_GAIN: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Louvain {
    /// Communities as sorted node ids, ordered by their smallest id.
    pub communities: Vec<Vec<NodeId>>,
    pub modularity: f64,
    /// Modularity of the singleton partition, then after every local-moving pass.
    pub trace: Vec<f64>,
}

impl Louvain {
    /// Largest community; ties go to the one with the smallest id.
    pub fn largest(&self) -> &[NodeId] {
        self.communities
            .iter()
            .reduce(|best, c| if c.len() > best.len() { c } else { best })
            .map(|c| c.as_slice())
            .unwrap_or(&[])
    }
}

/// Weighted graph with self loops; `adj[i]` holds `(j, A_ij)` and a self
/// loop appears as `(i, A_ii)`, so row sums are weighted degrees.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    total: f64,
}

impl Level {
    fn new(adj: Vec<Vec<(usize, f64)>>) -> Self {
        let degree: Vec<f64> = adj.iter().map(|r| r.iter().map(|&(_, w)| w).sum()).collect();
        let total = degree.iter().sum();
        Self { adj, degree, total }
    }

    fn modularity(&self, community: &[usize]) -> f64 {
        let k = community.iter().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for (i, row) in self.adj.iter().enumerate() {
            tot[community[i]] += self.degree[i];
            for &(j, w) in row {
                if community[j] == community[i] {
                    inside[community[i]] += w;
                }
            }
        }
        inside
            .iter()
            .zip(&tot)
            .map(|(&a, &t)| a / self.total - (t / self.total).powi(2))
            .sum()
    }

    /// Sweep nodes in index order, moving each to the neighbouring community
    /// of largest gain, until a sweep moves nothing. Returns whether any
    /// node moved.
    fn local_moving(&self, community: &mut [usize]) -> bool {
        let n = self.adj.len();
        let mut tot = vec![0.0; n];
        for i in 0..n {
            tot[community[i]] += self.degree[i];
        }
        let m2 = self.total;
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for i in 0..n {
                let own = community[i];
                let ki = self.degree[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in &self.adj[i] {
                    if j != i {
                        *links.entry(community[j]).or_insert(0.0) += w;
                    }
                }
                tot[own] -= ki;
                // gain of joining c, up to a constant shared by every c
                let gain = |c: usize, link: f64| link - tot[c] * ki / m2;
                let mut best = own;
                let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
                for (&c, &link) in &links {
                    let g = gain(c, link);
                    if g > best_gain + 1e-12 {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                if best != own {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                return moved_any;
            }
        }
    }

    /// Collapse communities (relabelled densely) into single nodes.
    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let mut relabel = BTreeMap::new();
        for &c in community {
            let next = relabel.len();
            relabel.entry(c).or_insert(next);
        }
        let dense: Vec<usize> = community.iter().map(|c| relabel[c]).collect();
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); relabel.len()];
        for (i, row) in self.adj.iter().enumerate() {
            for &(j, w) in row {
                *weights[dense[i]].entry(dense[j]).or_insert(0.0) += w;
            }
        }
        let adj = weights.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level::new(adj), dense)
    }
}

pub fn louvain_communities(g: &HeteroGraph) -> Result<Louvain> {
    if g.edge_count() == 0 {
        return Err(Error::Empty("Louvain needs at least one edge".into()));
    }
    // order nodes by id so the result does not depend on insertion order
    let mut ids: Vec<NodeId> = g.nodes().iter().map(|n| n.id).collect();
    ids.sort_unstable();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    for &(u, v) in g.edges() {
        let (a, b) = (index[&u], index[&v]);
        adj[a].push((b, 1.0));
        adj[b].push((a, 1.0));
    }
    adj.iter_mut().for_each(|r| r.sort_by_key(|&(j, _)| j));

    let mut level = Level::new(adj);
    // membership[i] = level node holding original node i
    let mut membership: Vec<usize> = (0..ids.len()).collect();
    let singletons: Vec<usize> = (0..ids.len()).collect();
    let mut modularity = level.modularity(&singletons);
    let mut trace = vec![modularity];
    loop {
        let mut community: Vec<usize> = (0..level.adj.len()).collect();
        if !level.local_moving(&mut community) {
            break;
        }
        let q = level.modularity(&community);
        trace.push(q);
        let (next, dense) = level.aggregate(&community);
        membership.iter_mut().for_each(|m| *m = dense[*m]);
        level = next;
        let gained = q - modularity;
        modularity = q;
        if gained <= MIN_GAIN {
            break;
        }
    }

    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, &m) in membership.iter().enumerate() {
        groups.entry(m).or_default().push(ids[i]);
    }
    let mut communities: Vec<Vec<NodeId>> = groups.into_values().collect();
    communities.sort_by_key(|c| c[0]);
    Ok(Louvain {
        communities,
        modularity,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_ba_shapes;
    use crate::graph::tests::complete;
    use crate::rng::seeded;
    use rand::Rng;
    use std::collections::BTreeSet;

    /// Q = Σ_c [ L_c / m − (d_c / 2m)² ] over undirected edges.
    fn oracle_modularity(g: &HeteroGraph, part: &BTreeMap<NodeId, usize>) -> f64 {
        let m = g.edge_count() as f64;
        let k = part.values().max().unwrap() + 1;
        let (mut inner, mut deg) = (vec![0.0; k], vec![0.0; k]);
        for &(u, v) in g.edges() {
            deg[part[&u]] += 1.0;
            deg[part[&v]] += 1.0;
            if part[&u] == part[&v] {
                inner[part[&u]] += 1.0;
            }
        }
        (0..k).map(|c| inner[c] / m - (deg[c] / (2.0 * m)).powi(2)).sum()
    }

    fn as_map(communities: &[Vec<NodeId>]) -> BTreeMap<NodeId, usize> {
        communities
            .iter()
            .enumerate()
            .flat_map(|(c, ids)| ids.iter().map(move |&id| (id, c)))
            .collect()
    }

    fn is_partition(g: &HeteroGraph, communities: &[Vec<NodeId>]) -> bool {
        let all: Vec<NodeId> = communities.iter().flatten().copied().collect();
        let set: BTreeSet<NodeId> = all.iter().copied().collect();
        all.len() == g.node_count() && g.nodes().iter().all(|n| set.contains(&n.id))
    }

    fn random_graph(seed: u64) -> HeteroGraph {
        let mut rng = seeded(seed);
        let n = rng.random_range(4..16);
        let p = rng.random_range(0.15..0.6);
        let mut edges = vec![(0, 1)];
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        HeteroGraph::from_edges(n, "node", &edges).unwrap()
    }

    /// Best modularity over every set partition, by restricted growth strings.
    fn best_partition(g: &HeteroGraph) -> f64 {
        let ids: Vec<NodeId> = g.nodes().iter().map(|n| n.id).collect();
        let n = ids.len();
        let mut labels = vec![0usize; n];
        let mut best = f64::MIN;
        fn rec(i: usize, max: usize, labels: &mut Vec<usize>, ids: &[NodeId], g: &HeteroGraph, best: &mut f64) {
            if i == labels.len() {
                let part: BTreeMap<NodeId, usize> = ids.iter().copied().zip(labels.iter().copied()).collect();
                *best = best.max(oracle_modularity(g, &part));
                return;
            }
            for c in 0..=max + 1 {
                labels[i] = c;
                rec(i + 1, max.max(c), labels, ids, g, best);
            }
        }
        rec(1, 0, &mut labels, &ids, g, &mut best);
        best
    }

    #[test]
    fn two_cliques_with_a_bridge() {
        let mut edges = Vec::new();
        for off in [0u32, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((off + i, off + j));
                }
            }
        }
        edges.push((3, 4));
        let g = HeteroGraph::from_edges(8, "node", &edges).unwrap();
        let result = louvain_communities(&g).unwrap();
        assert_eq!(result.communities, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);

        // the clique split is the best of all 2-partitions
        let mut best = (f64::MIN, 0u32);
        for mask in 1u32..(1 << 7) {
            let part: BTreeMap<NodeId, usize> = (0..8).map(|i| (i, if i < 7 && mask >> i & 1 == 1 { 1 } else { 0 })).collect();
            let q = oracle_modularity(&g, &part);
            if q > best.0 {
                best = (q, mask);
            }
        }
        assert_eq!(best.1, 0b0001111);
        assert!((result.modularity - best.0).abs() < 1e-12);
        assert!((result.modularity - oracle_modularity(&g, &as_map(&result.communities))).abs() < 1e-12);
    }

    #[test]
    fn triangle_is_one_community() {
        let result = louvain_communities(&complete(3)).unwrap();
        assert_eq!(result.communities, vec![vec![0, 1, 2]]);
        assert!(result.modularity.abs() < 1e-12);
    }

    #[test]
    fn edgeless_graph_errors() {
        let g = HeteroGraph::from_edges(3, "node", &[]).unwrap();
        assert!(louvain_communities(&g).is_err());
    }

    #[test]
    fn passes_never_lower_modularity() {
        for seed in 0..50 {
            let g = random_graph(seed);
            let r = louvain_communities(&g).unwrap();
            assert!(is_partition(&g, &r.communities));
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", r.trace);
            assert!(r.modularity >= -1e-12);
            assert!((r.modularity - oracle_modularity(&g, &as_map(&r.communities))).abs() < 1e-9);
        }
    }

    #[test]
    fn small_house_fixture_reaches_the_exhaustive_optimum() {
        // with 5 base nodes the optimum splits the house; only optimality is checked
        let g = gen_ba_shapes(5, 1, &mut seeded(2));
        let r = louvain_communities(&g).unwrap();
        assert!((r.modularity - best_partition(&g)).abs() < 1e-9);
    }

    #[test]
    fn house_on_ba_stays_in_one_community() {
        for base in [10usize, 15, 20, 25] {
            for seed in 0..8 {
                let g = gen_ba_shapes(base, 1, &mut seeded(seed));
                let r = louvain_communities(&g).unwrap();
                let house: Vec<NodeId> = (base as NodeId..base as NodeId + 5).collect();
                assert!(r.communities.iter().any(|c| house.iter().all(|h| c.contains(h))), "base {base} seed {seed}");
            }
        }
        let g = gen_ba_shapes(10, 1, &mut seeded(2));
        let r = louvain_communities(&g).unwrap();
        assert!((10..15).all(|h| r.largest().contains(&h)), "{:?}", r.communities);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let g = random_graph(7);
        let mut h = HeteroGraph::new();
        for n in g.nodes().iter().rev() {
            h.add_node(n.id, &n.ty).unwrap();
        }
        for &(u, v) in g.edges().iter().rev() {
            h.add_edge(v, u).unwrap();
        }
        assert_eq!(louvain_communities(&g).unwrap(), louvain_communities(&h).unwrap());
    }
}
