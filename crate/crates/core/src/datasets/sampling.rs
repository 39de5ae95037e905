//! Forest-fire subgraph sampling and size-bucketed training corpora.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_connected, HeteroGraph};

pub const DEFAULT_BURN_PROBABILITY: f64 = 0.4;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestFireConfig {
    pub burn_probability: f64,
    pub max_attempts: usize,
}

impl Default for ForestFireConfig {
    fn default() -> Self {
        Self {
            burn_probability: DEFAULT_BURN_PROBABILITY,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// One burn from a random seed node; `None` if the fire dies early.
fn burn<R: Rng + ?Sized>(
    adj: &[Vec<usize>],
    seeds: &[usize],
    n: usize,
    spread: &Geometric,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let seed = seeds[rng.random_range(0..seeds.len())];
    let mut burned = vec![false; adj.len()];
    burned[seed] = true;
    let mut order = vec![seed];
    let mut queue = VecDeque::from([seed]);
    while order.len() < n {
        let v = queue.pop_front()?;
        let mut fresh: Vec<usize> = adj[v].iter().copied().filter(|&u| !burned[u]).collect();
        // ignite a uniformly random subset; truncation to reach exactly n
        // keeps a uniformly random part of the batch
        fresh.shuffle(rng);
        let want = (spread.sample(rng) as usize + 1).min(fresh.len()).min(n - order.len());
        for &u in &fresh[..want] {
            burned[u] = true;
            order.push(u);
            queue.push_back(u);
        }
    }
    Some(order)
}

/// Induced subgraph on exactly `n` burned nodes. The fire starts at a random
/// node of `seed_type`; each burning node ignites `Geometric(1 - p)` (support
/// `≥ 1`) of its unburned neighbors. A fire that dies before reaching `n`
/// restarts from a fresh seed, up to `max_attempts` times.
pub fn forest_fire_sample<R: Rng + ?Sized>(
    g: &HeteroGraph,
    n: usize,
    seed_type: &str,
    config: &ForestFireConfig,
    rng: &mut R,
) -> Result<HeteroGraph> {
    if n == 0 || n > g.node_count() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} nodes from a graph of {}",
            g.node_count()
        )));
    }
    let seeds = g.positions_of_type(seed_type);
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(format!("graph has no `{seed_type}` node")));
    }
    let p = config.burn_probability;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("burn probability {p} outside [0, 1)")));
    }
    let spread = Geometric::new(1.0 - p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let adj = g.adjacency();
    for _ in 0..config.max_attempts.max(1) {
        if let Some(order) = burn(&adj, &seeds, n, &spread, rng) {
            return Ok(g.induced_subgraph(&order));
        }
    }
    Err(Error::SamplingFailed {
        attempts: config.max_attempts,
        target: n,
    })
}

/// Inclusive range of graph sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
}

impl SizeRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::InvalidArgument(format!("empty size range {min}..={max}")));
        }
        Ok(Self { min, max })
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> {
        self.min..=self.max
    }
}

/// Training graphs grouped by node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCorpus {
    pub sizes: SizeRange,
    pub buckets: BTreeMap<usize, Vec<HeteroGraph>>,
}

impl SampledCorpus {
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        self.buckets.iter().map(|(&n, b)| (n, b.len())).collect()
    }

    pub fn total(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &HeteroGraph> {
        self.buckets.values().flatten()
    }
}

pub enum CorpusSource<'a> {
    /// One large graph, sampled by forest fire (node classification).
    Single(&'a HeteroGraph),
    /// A graph collection, bucketed by size (graph classification).
    Collection(&'a [HeteroGraph]),
}

/// Forest-fire `per_size` graphs for every size, or bucket the connected
/// collection graphs whose size is in range (at most `per_size` each).
pub fn build_corpus<R: Rng + ?Sized>(
    source: CorpusSource<'_>,
    sizes: SizeRange,
    per_size: usize,
    seed_type: &str,
    config: &ForestFireConfig,
    rng: &mut R,
) -> Result<SampledCorpus> {
    let mut buckets = BTreeMap::new();
    match source {
        CorpusSource::Single(g) => {
            for n in sizes.sizes() {
                let bucket = (0..per_size)
                    .map(|_| forest_fire_sample(g, n, seed_type, config, rng))
                    .collect::<Result<Vec<_>>>()?;
                buckets.insert(n, bucket);
            }
        }
        CorpusSource::Collection(graphs) => {
            for n in sizes.sizes() {
                let bucket: Vec<HeteroGraph> = graphs
                    .iter()
                    .filter(|g| g.node_count() == n && is_connected(g))
                    .take(per_size)
                    .cloned()
                    .collect();
                if !bucket.is_empty() {
                    buckets.insert(n, bucket);
                }
            }
        }
    }
    Ok(SampledCorpus { sizes, buckets })
}
