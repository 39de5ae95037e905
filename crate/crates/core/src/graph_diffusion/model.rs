//! Training, forward noising and reverse sampling of fixed-size graph
//! denoisers, plus the per-size model bank.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{cosine_schedule, empirical_marginal, CategoricalDiffusion, NoiseSchedule};
use super::transformer::GraphTransformer;
use super::DenseGraphState;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::neural::{cross_entropy_indices, AdamConfig, AdamState, Matrix, Parameters};
use crate::rng::{derive, sample_categorical, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphDiffusionConfig {
    pub diffusion_steps: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    /// Weight of the edge loss relative to the node loss.
    pub lambda: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_steps: usize,
}

impl Default for GraphDiffusionConfig {
    fn default() -> Self {
        Self {
            diffusion_steps: 500,
            hidden: 64,
            layers: 2,
            heads: 4,
            lambda: 5.0,
            batch_size: 32,
            learning_rate: 2e-4,
            weight_decay: 1e-12,
            train_steps: 1000,
        }
    }
}

/// Node-type and edge marginals of one size bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub nodes: CategoricalDiffusion,
    pub edges: CategoricalDiffusion,
}

impl TransitionModel {
    pub fn from_states(states: &[DenseGraphState], node_types: usize) -> Self {
        let mut type_counts = vec![0.0; node_types];
        let mut edge_counts = vec![0.0; 2];
        for s in states {
            for &t in &s.node_types {
                type_counts[t] += 1.0;
            }
            let n = s.n();
            for i in 0..n {
                for j in i + 1..n {
                    edge_counts[s.edge(i, j) as usize] += 1.0;
                }
            }
        }
        Self {
            nodes: CategoricalDiffusion::new(empirical_marginal(&type_counts)),
            edges: CategoricalDiffusion::new(empirical_marginal(&edge_counts)),
        }
    }
}

/// Resample every node type and node pair from its row of `Q̄_t`.
pub fn forward_noise_graph<R: Rng + ?Sized>(
    g0: &DenseGraphState,
    t: usize,
    schedule: &NoiseSchedule,
    transitions: &TransitionModel,
    rng: &mut R,
) -> DenseGraphState {
    let n = g0.n();
    let mut out = DenseGraphState::empty(n);
    for i in 0..n {
        let p = transitions.nodes.noisy_distribution(schedule, t, g0.node_types[i]);
        out.node_types[i] = sample_categorical(rng, &p);
    }
    for i in 0..n {
        for j in i + 1..n {
            let p = transitions.edges.noisy_distribution(schedule, t, g0.edge(i, j) as usize);
            out.set_edge(i, j, sample_categorical(rng, &p) == 1);
        }
    }
    out
}

/// A trained structure model for graphs of exactly `n` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDenoiser {
    pub n: usize,
    pub node_types: Vec<String>,
    pub config: GraphDiffusionConfig,
    pub schedule: NoiseSchedule,
    pub transitions: TransitionModel,
    pub network: GraphTransformer,
    pub loss_history: Vec<f64>,
}

impl GraphDenoiser {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// `L_Nodes + λ·L_Edges` on one noisy example, with parameter gradients.
/// Edge cross-entropy is averaged over ordered off-diagonal pairs.
pub fn example_loss(
    net: &GraphTransformer,
    clean: &DenseGraphState,
    noisy: &DenseGraphState,
    t_frac: f64,
    lambda: f64,
) -> Result<(f64, GraphTransformer)> {
    let n = clean.n();
    let (out, cache) = net.forward(noisy, t_frac)?;
    let (node_loss, d_node) = cross_entropy_indices(&out.node_logits, &clean.node_types);
    let pairs: Vec<usize> = (0..n * n).filter(|r| r / n != r % n).collect();
    let mut d_edge = Matrix::zeros(n * n, 2);
    let mut edge_loss = 0.0;
    if !pairs.is_empty() {
        let targets: Vec<usize> = pairs.iter().map(|&r| clean.edge(r / n, r % n) as usize).collect();
        let (l, d) = cross_entropy_indices(&out.edge_logits.select_rows(&pairs), &targets);
        edge_loss = l;
        for (k, &r) in pairs.iter().enumerate() {
            for c in 0..2 {
                d_edge[(r, c)] = lambda * d[(k, c)];
            }
        }
    }
    let grad = net.backward(&cache, &d_node, &d_edge);
    Ok((node_loss + lambda * edge_loss, grad))
}

/// Train one denoiser on a bucket of same-size graphs. Types are indexed by
/// `node_types`; every bucket graph must use only those types.
pub fn train_graph_denoiser(
    bucket: &[HeteroGraph],
    node_types: &[String],
    config: &GraphDiffusionConfig,
    seed: u64,
) -> Result<GraphDenoiser> {
    let first = bucket
        .first()
        .ok_or_else(|| Error::Empty("graph bucket has no graphs".into()))?;
    let n = first.node_count();
    if let Some(g) = bucket.iter().find(|g| g.node_count() != n) {
        return Err(Error::InvalidArgument(format!(
            "bucket mixes sizes {n} and {}",
            g.node_count()
        )));
    }
    if config.diffusion_steps == 0 || config.batch_size == 0 {
        return Err(Error::InvalidArgument("diffusion steps and batch size must be positive".into()));
    }
    let states = bucket
        .iter()
        .map(|g| DenseGraphState::from_graph(g, node_types))
        .collect::<Result<Vec<_>>>()?;
    let transitions = TransitionModel::from_states(&states, node_types.len());
    let schedule = cosine_schedule(config.diffusion_steps);
    let mut rng = seeded(seed);
    let mut net = GraphTransformer::new(node_types.len(), config.hidden, config.layers, config.heads, &mut rng)?;
    let mut adam = AdamState::new(
        AdamConfig::with_lr(config.learning_rate, config.weight_decay),
        net.num_params(),
    );
    let steps = config.diffusion_steps;
    let mut history = Vec::with_capacity(config.train_steps);
    for _ in 0..config.train_steps {
        let jobs: Vec<(usize, usize, u64)> = (0..config.batch_size)
            .map(|_| (rng.random_range(0..states.len()), rng.random_range(1..=steps), rng.next_u64()))
            .collect();
        let results = jobs
            .par_iter()
            .map(|&(idx, t, s)| {
                let mut local = seeded(s);
                let noisy = forward_noise_graph(&states[idx], t, &schedule, &transitions, &mut local);
                example_loss(&net, &states[idx], &noisy, t as f64 / steps as f64, config.lambda)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = net.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &results {
            loss += l;
            grad.accumulate(g);
        }
        let scale = 1.0 / results.len() as f64;
        grad.scale_params(scale);
        history.push(loss * scale);
        adam.step(&mut net, &grad);
    }
    log::debug!(
        "trained size-{n} denoiser: final loss {:?}",
        history.last()
    );
    Ok(GraphDenoiser {
        n,
        node_types: node_types.to_vec(),
        config: config.clone(),
        schedule,
        transitions,
        network: net,
        loss_history: history,
    })
}

fn sample_one(model: &GraphDenoiser, seed: u64) -> Result<HeteroGraph> {
    let mut rng = seeded(seed);
    let n = model.n;
    let tr = &model.transitions;
    let mut state = DenseGraphState::empty(n);
    for i in 0..n {
        state.node_types[i] = sample_categorical(&mut rng, &tr.nodes.marginal);
        for j in i + 1..n {
            state.set_edge(i, j, sample_categorical(&mut rng, &tr.edges.marginal) == 1);
        }
    }
    let steps = model.schedule.steps;
    for t in (1..=steps).rev() {
        let (out, _) = model.network.forward(&state, t as f64 / steps as f64)?;
        let node_p = out.node_probs();
        let edge_p = out.edge_probs();
        let mut next = DenseGraphState::empty(n);
        for i in 0..n {
            let p = tr.nodes.reverse_step(&model.schedule, t, state.node_types[i], node_p.row(i));
            next.node_types[i] = sample_categorical(&mut rng, &p);
        }
        for i in 0..n {
            for j in i + 1..n {
                let p = tr
                    .edges
                    .reverse_step(&model.schedule, t, state.edge(i, j) as usize, edge_p.row(i * n + j));
                next.set_edge(i, j, sample_categorical(&mut rng, &p) == 1);
            }
        }
        state = next;
    }
    Ok(state.to_graph(&model.node_types))
}

/// Reverse-diffuse `count` graphs. Each sample gets its own seed drawn from
/// `rng`, so the result is deterministic for a given generator state.
pub fn sample_graphs<R: RngCore + ?Sized>(
    model: &GraphDenoiser,
    count: usize,
    rng: &mut R,
) -> Result<Vec<HeteroGraph>> {
    let seeds: Vec<u64> = (0..count).map(|_| rng.next_u64()).collect();
    seeds.par_iter().map(|&s| sample_one(model, s)).collect()
}

/// One trained denoiser per graph size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelBank {
    pub models: BTreeMap<usize, GraphDenoiser>,
}

impl ModelBank {
    /// Trains every bucket independently and in parallel; the model for size
    /// `n` is seeded from `(seed, n)`.
    pub fn train(
        buckets: &BTreeMap<usize, Vec<HeteroGraph>>,
        node_types: &[String],
        config: &GraphDiffusionConfig,
        seed: u64,
    ) -> Result<Self> {
        let models = buckets
            .par_iter()
            .map(|(&n, bucket)| {
                let s = derive(seed, n as u64).next_u64();
                train_graph_denoiser(bucket, node_types, config, s).map(|m| (n, m))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { models })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.models.keys().copied().collect()
    }

    pub fn get(&self, n: usize) -> Option<&GraphDenoiser> {
        self.models.get(&n)
    }
}
