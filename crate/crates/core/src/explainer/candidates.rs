use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::feature_diffusion::FeatureBank;
use crate::graph::{is_connected, is_valid_wrt_metagraph, HeteroGraph};
use crate::graph_diffusion::{sample_graphs, ModelBank};
use crate::rng::seeded;

/// Generated / connected / valid tallies; always non-increasing in that order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCounts {
    pub generated: usize,
    pub connected: usize,
    pub valid: usize,
}

impl PipelineCounts {
    fn add(&mut self, other: &PipelineCounts) {
        self.generated += other.generated;
        self.connected += other.connected;
        self.valid += other.valid;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub graph: HeteroGraph,
    pub size: usize,
    /// Seed of the per-size stream the graph was drawn from.
    pub seed: u64,
    /// Class whose generator produced the classified-type feature rows.
    pub feature_class: Option<usize>,
}

/// Connected, metagraph-valid candidates with features attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub counts: PipelineCounts,
    pub per_size: BTreeMap<usize, PipelineCounts>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &HeteroGraph> {
        self.candidates.iter().map(|c| &c.graph)
    }
}

/// Sample `per_size` graphs from every size model, drop disconnected and
/// then metagraph-invalid ones, and attach fresh feature rows to the rest.
/// Classified-type rows come from the generator of a uniformly drawn class,
/// so one shared pool serves every class.
pub fn generate_candidates<R: RngCore + ?Sized>(
    bank: &ModelBank,
    features: Option<&FeatureBank>,
    per_size: usize,
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<CandidateSet> {
    if per_size == 0 {
        return Err(Error::InvalidArgument("per_size must be at least 1".into()));
    }
    if bank.models.is_empty() {
        return Err(Error::Empty("graph model bank has no sizes".into()));
    }
    let jobs: Vec<(usize, u64)> = bank.sizes().into_iter().map(|n| (n, rng.next_u64())).collect();
    let per: Vec<(usize, PipelineCounts, Vec<Candidate>)> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let mut stream = seeded(seed);
            let model = bank.get(n).expect("size taken from the bank");
            let graphs = sample_graphs(model, per_size, &mut stream)?;
            let mut counts = PipelineCounts {
                generated: graphs.len(),
                ..Default::default()
            };
            let mut kept = Vec::new();
            for mut g in graphs {
                if !is_connected(&g) {
                    continue;
                }
                counts.connected += 1;
                if !is_valid_wrt_metagraph(&g, &spec.metagraph) {
                    continue;
                }
                counts.valid += 1;
                let class = stream.random_range(0..spec.num_classes);
                if let Some(bank) = features {
                    bank.attach(&mut g, class, &mut stream)?;
                }
                kept.push(Candidate {
                    graph: g,
                    size: n,
                    seed,
                    feature_class: features.map(|_| class),
                });
            }
            Ok((n, counts, kept))
        })
        .collect::<Result<_>>()?;

    let mut set = CandidateSet {
        candidates: Vec::new(),
        counts: PipelineCounts::default(),
        per_size: BTreeMap::new(),
    };
    for (n, counts, kept) in per {
        set.counts.add(&counts);
        set.per_size.insert(n, counts);
        set.candidates.extend(kept);
    }
    log::info!(
        "candidates: {} generated, {} connected, {} valid",
        set.counts.generated,
        set.counts.connected,
        set.counts.valid
    );
    if set.is_empty() {
        return Err(Error::NoCandidates(format!(
            "none of {} generated graphs is connected and metagraph-valid",
            set.counts.generated
        )));
    }
    Ok(set)
}
