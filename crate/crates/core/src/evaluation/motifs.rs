use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::louvain::louvain_communities;
use crate::datasets::{DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::graph::{is_connected, is_isomorphic, HeteroGraph};

/// Default motif cap per class.
pub const DEFAULT_MAX_MOTIFS: usize = 30;

/// Ground-truth motifs, per class or shared by every class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotifSet {
    /// Empty in shared mode.
    pub per_class: Vec<Vec<HeteroGraph>>,
    pub shared: Vec<HeteroGraph>,
    /// Classes without pure samples, which use the shared list instead.
    pub fallback: Vec<usize>,
}

impl MotifSet {
    pub fn per_class(per_class: Vec<Vec<HeteroGraph>>) -> Self {
        Self {
            per_class,
            ..Default::default()
        }
    }

    pub fn shared(shared: Vec<HeteroGraph>) -> Self {
        Self {
            shared,
            ..Default::default()
        }
    }

    pub fn for_class(&self, class: usize) -> &[HeteroGraph] {
        match self.per_class.get(class) {
            Some(list) if !list.is_empty() => list,
            _ => &self.shared,
        }
    }
}

/// Class shared by every labeled target of `g`, if there is exactly one.
fn pure_class(g: &HeteroGraph, spec: &DatasetSpec) -> Option<usize> {
    match spec.task {
        Task::GraphClassification => g.graph_label(),
        Task::NodeClassification => {
            let mut classes = g
                .nodes()
                .iter()
                .filter(|n| n.ty == spec.classified_type)
                .filter_map(|n| g.label(n.id));
            let first = classes.next()?;
            classes.all(|c| c == first).then_some(first)
        }
    }
}

/// Induced subgraph on the largest Louvain community, kept as a bare
/// structure (ids and types only) when connected with at least 3 nodes.
fn community_motif(g: &HeteroGraph) -> Result<Option<HeteroGraph>> {
    if g.edge_count() == 0 {
        return Ok(None);
    }
    let communities = louvain_communities(g)?;
    let positions: Vec<usize> = communities
        .largest()
        .iter()
        .map(|&id| g.position(id).expect("community ids come from g"))
        .collect();
    let sub = g.induced_subgraph(&positions);
    if sub.node_count() < 3 || !is_connected(&sub) {
        return Ok(None);
    }
    let mut bare = HeteroGraph::new();
    for n in sub.nodes() {
        bare.add_node(n.id, &n.ty)?;
    }
    for &(u, v) in sub.edges() {
        bare.add_edge(u, v)?;
    }
    Ok(Some(bare))
}

/// Drop isomorphic duplicates, order largest first (stable on ties) and cap.
fn finalize(motifs: Vec<HeteroGraph>, max_motifs: usize) -> Vec<HeteroGraph> {
    let mut unique: Vec<HeteroGraph> = Vec::new();
    for m in motifs {
        if !unique.iter().any(|u| is_isomorphic(u, &m)) {
            unique.push(m);
        }
    }
    unique.sort_by(|a, b| {
        (b.node_count(), b.edge_count()).cmp(&(a.node_count(), a.edge_count()))
    });
    unique.truncate(max_motifs);
    unique
}

/// Ground-truth motifs from real samples: the largest Louvain community of
/// each sample. In per-class mode only samples whose labeled targets share
/// one class contribute, to that class; classes left empty fall back to the
/// pooled list.
pub fn extract_motifs(samples: &[HeteroGraph], spec: &DatasetSpec, per_class: bool, max_motifs: usize) -> Result<MotifSet> {
    if max_motifs == 0 {
        return Err(Error::InvalidArgument("max_motifs must be at least 1".into()));
    }
    let found: Vec<(Option<usize>, HeteroGraph)> = samples
        .par_iter()
        .map(|g| Ok(community_motif(g)?.map(|m| (pure_class(g, spec), m))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if found.is_empty() {
        return Err(Error::Empty("no sample yields a connected community of 3 or more nodes".into()));
    }
    let shared = finalize(found.iter().map(|(_, m)| m.clone()).collect(), max_motifs);
    if !per_class {
        return Ok(MotifSet::shared(shared));
    }
    let mut lists: Vec<Vec<HeteroGraph>> = vec![Vec::new(); spec.num_classes];
    for (class, m) in found {
        if let Some(c) = class.filter(|&c| c < spec.num_classes) {
            lists[c].push(m);
        }
    }
    let per_class: Vec<Vec<HeteroGraph>> = lists.into_iter().map(|l| finalize(l, max_motifs)).collect();
    let fallback: Vec<usize> = (0..spec.num_classes).filter(|&c| per_class[c].is_empty()).collect();
    if !fallback.is_empty() {
        log::warn!("classes {fallback:?} have no class-pure samples; using the shared motif list");
    }
    Ok(MotifSet {
        per_class,
        shared,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_ba_shapes, Motif};
    use crate::graph::{contains_subgraph, Metagraph};
    use crate::rng::seeded;

    fn spec(task: Task, classes: usize) -> DatasetSpec {
        let mut meta = Metagraph::new(["node"]);
        meta.connect("node", "node");
        DatasetSpec {
            name: "t".into(),
            task,
            classified_type: "node".into(),
            num_classes: classes,
            metagraph: meta,
        }
    }

    /// Two triangles (classes 0 and 1) bridged, labeled uniformly by `class`.
    fn labeled(class: Option<usize>, big: bool) -> HeteroGraph {
        let mut edges = vec![(0, 1), (1, 2), (0, 2)];
        if big {
            edges.extend([(3, 4), (4, 5), (3, 5), (5, 6), (6, 3), (2, 3)]);
        }
        let n = if big { 7 } else { 3 };
        let mut g = HeteroGraph::from_edges(n, "node", &edges).unwrap();
        for i in 0..n as u32 {
            g.set_label(i, class.unwrap_or(i as usize % 2)).unwrap();
        }
        g
    }

    #[test]
    fn pure_samples_feed_their_class_and_mixed_ones_only_the_pool() {
        let samples = vec![labeled(Some(0), false), labeled(None, true), labeled(Some(0), true)];
        let set = extract_motifs(&samples, &spec(Task::NodeClassification, 2), true, 30).unwrap();
        assert_eq!(set.per_class[0].len(), 2);
        assert!(set.per_class[1].is_empty());
        assert_eq!(set.fallback, vec![1]);
        assert_eq!(set.for_class(1), set.shared.as_slice());
        // largest first
        assert!(set.per_class[0][0].node_count() >= set.per_class[0][1].node_count());
        assert!(set.per_class[0].iter().chain(&set.shared).all(|m| m.node_count() >= 3 && is_connected(m)));
    }

    #[test]
    fn all_pure_samples_are_assigned() {
        let samples = vec![labeled(Some(0), false), labeled(Some(1), true)];
        let set = extract_motifs(&samples, &spec(Task::NodeClassification, 2), true, 30).unwrap();
        assert!(set.fallback.is_empty());
        assert_eq!(set.per_class.iter().map(Vec::len).sum::<usize>(), 2);
    }

    #[test]
    fn cap_and_duplicates() {
        let samples: Vec<HeteroGraph> = (0..5).map(|_| labeled(Some(0), false)).collect();
        let set = extract_motifs(&samples, &spec(Task::NodeClassification, 1), false, 30).unwrap();
        assert_eq!(set.shared.len(), 1);
        assert!(extract_motifs(&samples, &spec(Task::NodeClassification, 1), false, 0).is_err());
        let edgeless = HeteroGraph::from_edges(3, "node", &[]).unwrap();
        assert!(extract_motifs(&[edgeless], &spec(Task::NodeClassification, 1), false, 3).is_err());
    }

    #[test]
    fn house_sample_motif_contains_the_house() {
        let g = gen_ba_shapes(10, 1, &mut seeded(2));
        let set = extract_motifs(&[g], &spec(Task::NodeClassification, 4), false, 30).unwrap();
        assert!(contains_subgraph(&set.shared[0], &Motif::House.graph()));
    }

    #[test]
    fn graph_labels_define_purity() {
        let mut g = labeled(Some(0), true);
        g.set_graph_label(Some(1));
        let set = extract_motifs(&[g], &spec(Task::GraphClassification, 2), true, 30).unwrap();
        assert_eq!(set.fallback, vec![0]);
        assert_eq!(set.per_class[1].len(), 1);
    }
}
