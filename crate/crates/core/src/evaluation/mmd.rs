//! Squared MMD between graph sets, over per-graph normalized histograms of a
//! structural statistic, with a Gaussian kernel on total-variation distance.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{clustering_coefficients, laplacian_spectrum, node_type_histogram, HeteroGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStatistic {
    Degree,
    Clustering,
    Spectrum,
    NodeTypeDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub statistic: GraphStatistic,
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    /// Uniform bins over `range` for real-valued statistics; ignored for
    /// degree (one bin per integer degree) and node types (one per type).
    pub bins: usize,
    pub range: (f64, f64),
}

impl MmdConfig {
    pub fn new(statistic: GraphStatistic) -> Self {
        let (bins, range) = match statistic {
            GraphStatistic::Clustering => (100, (0.0, 1.0)),
            GraphStatistic::Spectrum => (200, (0.0, 2.0)),
            GraphStatistic::Degree | GraphStatistic::NodeTypeDistribution => (1, (0.0, 1.0)),
        };
        Self {
            statistic,
            sigma: 1.0,
            bins,
            range,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || self.bins == 0 || !(self.range.1 > self.range.0) {
            return Err(Error::InvalidArgument(format!("invalid MMD configuration {self:?}")));
        }
        Ok(())
    }
}

fn binned(values: &[f64], bins: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    if values.is_empty() {
        return h;
    }
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Normalized histogram of every graph over one shared support.
pub fn histograms(graphs: &[&HeteroGraph], cfg: &MmdConfig) -> Vec<Vec<f64>> {
    match cfg.statistic {
        GraphStatistic::Degree => {
            let degrees: Vec<Vec<usize>> = graphs.iter().map(|g| g.degrees()).collect();
            let max = degrees.iter().flatten().copied().max().unwrap_or(0);
            degrees
                .iter()
                .map(|d| {
                    let mut h = vec![0.0; max + 1];
                    for &k in d {
                        h[k] += 1.0;
                    }
                    let n = d.len().max(1) as f64;
                    h.iter_mut().for_each(|x| *x /= n);
                    h
                })
                .collect()
        }
        GraphStatistic::Clustering => graphs
            .iter()
            .map(|g| binned(&clustering_coefficients(g).per_node, cfg.bins, cfg.range))
            .collect(),
        GraphStatistic::Spectrum => graphs
            .par_iter()
            .map(|g| binned(&laplacian_spectrum(g), cfg.bins, cfg.range))
            .collect(),
        GraphStatistic::NodeTypeDistribution => {
            let per: Vec<_> = graphs.iter().map(|g| node_type_histogram(g)).collect();
            let types: BTreeSet<&String> = per.iter().flat_map(|h| h.keys()).collect();
            per.iter()
                .map(|h| types.iter().map(|t| h.get(*t).copied().unwrap_or(0.0)).collect())
                .collect()
        }
    }
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn kernel_mean(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let denom = 2.0 * sigma * sigma;
    let total: f64 = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| (-total_variation(x, y).powi(2) / denom).exp())
                .sum::<f64>()
        })
        .sum();
    total / (a.len() * b.len()) as f64
}

/// Biased (V-statistic) squared MMD, clamped at 0.
pub fn mmd(set_a: &[HeteroGraph], set_b: &[HeteroGraph], cfg: &MmdConfig) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::Empty("MMD needs two non-empty graph sets".into()));
    }
    cfg.validate()?;
    let all: Vec<&HeteroGraph> = set_a.iter().chain(set_b).collect();
    let mut hists = histograms(&all, cfg);
    let hb = hists.split_off(set_a.len());
    let ha = hists;
    let value = kernel_mean(&ha, &ha, cfg.sigma) + kernel_mean(&hb, &hb, cfg.sigma)
        - 2.0 * kernel_mean(&ha, &hb, cfg.sigma);
    Ok(value.max(0.0))
}

/// MMD of node-type distributions; zero for homogeneous sets.
pub fn ntd_mmd(generated: &[HeteroGraph], real: &[HeteroGraph]) -> Result<f64> {
    mmd(generated, real, &MmdConfig::new(GraphStatistic::NodeTypeDistribution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{complete, cycle};
    use crate::graph::HeteroGraph;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_graph(n: usize, p: f64, seed: u64) -> HeteroGraph {
        let mut rng = seeded(seed);
        let mut g = HeteroGraph::new();
        for i in 0..n as u32 {
            g.add_node(i, if rng.random_bool(0.5) { "a" } else { "b" }).unwrap();
        }
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if rng.random_bool(p) {
                    g.add_edge(i, j).unwrap();
                }
            }
        }
        g
    }

    fn all_stats() -> [MmdConfig; 4] {
        [
            MmdConfig::new(GraphStatistic::Degree),
            MmdConfig::new(GraphStatistic::Clustering),
            MmdConfig::new(GraphStatistic::Spectrum),
            MmdConfig::new(GraphStatistic::NodeTypeDistribution),
        ]
    }

    #[test]
    fn two_singletons_match_hand_expansion() {
        // degree histograms {1: 1.0} and {2: 1.0}: TV = 1
        let a = HeteroGraph::from_edges(2, "n", &[(0, 1)]).unwrap();
        let b = cycle(3);
        let v = mmd(&[a], &[b], &MmdConfig::new(GraphStatistic::Degree)).unwrap();
        assert!((v - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-12);
        assert!((v - 0.7869).abs() < 1e-4);
    }

    #[test]
    fn homogeneous_type_mmd_is_zero() {
        let a = vec![cycle(4), complete(5)];
        let b = vec![cycle(7)];
        assert_eq!(ntd_mmd(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_type_supports() {
        let a = HeteroGraph::from_edges(2, "x", &[(0, 1)]).unwrap();
        let b = HeteroGraph::from_edges(2, "y", &[(0, 1)]).unwrap();
        let v = ntd_mmd(&[a], &[b]).unwrap();
        assert!((v - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn empty_sets_error() {
        assert!(mmd(&[], &[cycle(3)], &MmdConfig::new(GraphStatistic::Degree)).is_err());
        let mut bad = MmdConfig::new(GraphStatistic::Spectrum);
        bad.sigma = 0.0;
        assert!(mmd(&[cycle(3)], &[cycle(3)], &bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn axioms_on_random_sets(seed in 0u64..1000, na in 1usize..4, nb in 1usize..4) {
            let a: Vec<HeteroGraph> = (0..na).map(|i| random_graph(6, 0.4, seed * 10 + i as u64)).collect();
            let b: Vec<HeteroGraph> = (0..nb).map(|i| random_graph(7, 0.3, seed * 10 + 5 + i as u64)).collect();
            for cfg in all_stats() {
                prop_assert_eq!(mmd(&a, &a, &cfg).unwrap(), 0.0);
                let ab = mmd(&a, &b, &cfg).unwrap();
                let ba = mmd(&b, &a, &cfg).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ab >= 0.0);
            }
        }
    }
}
