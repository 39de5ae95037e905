use rayon::prelude::*;

use super::motifs::MotifSet;
use crate::error::{Error, Result};
use crate::explainer::ExplanationReport;
use crate::graph::{contains_subgraph, FeatureMatrix};

fn unit_mean(m: &FeatureMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; m.width()];
    for row in m.rows_f64() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        // zero rows contribute cosine 0
        if norm > 0.0 {
            acc.iter_mut().zip(&row).for_each(|(a, v)| *a += v / norm);
        }
    }
    let n = m.n_rows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Mean cosine similarity over all generated/training row pairs. The double
/// sum factors into the dot product of the two mean unit vectors.
pub fn feature_cosine(generated: &FeatureMatrix, train: &FeatureMatrix) -> Result<f64> {
    if generated.width() != train.width() {
        return Err(Error::Shape(format!(
            "feature widths differ: {} vs {}",
            generated.width(),
            train.width()
        )));
    }
    if generated.n_rows() == 0 || train.n_rows() == 0 {
        return Err(Error::Empty("cosine similarity needs rows on both sides".into()));
    }
    let (a, b) = (unit_mean(generated), unit_mean(train));
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0))
}

/// Mean over classes of the winning class probability.
pub fn predictive_faithfulness(report: &ExplanationReport) -> Result<f64> {
    if report.explanations.is_empty() {
        return Err(Error::Empty("report has no explanations".into()));
    }
    Ok(report.explanations.iter().map(|e| e.probability).sum::<f64>() / report.explanations.len() as f64)
}

/// Mean over classes of the fraction of that class's motifs contained in its
/// explanation graph.
pub fn ground_truth_faithfulness(report: &ExplanationReport, motifs: &MotifSet) -> Result<f64> {
    if report.explanations.is_empty() {
        return Err(Error::Empty("report has no explanations".into()));
    }
    let jobs: Vec<(usize, usize)> = report
        .explanations
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let n = motifs.for_class(e.class).len();
            if n == 0 {
                return Err(Error::Empty(format!("no motifs for class {}", e.class)));
            }
            Ok((0..n).map(move |j| (i, j)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let hits: Vec<bool> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let e = &report.explanations[i];
            contains_subgraph(&e.graph, &motifs.for_class(e.class)[j])
        })
        .collect();
    let mut total = 0.0;
    for (i, e) in report.explanations.iter().enumerate() {
        let n = motifs.for_class(e.class).len();
        let found = jobs.iter().zip(&hits).filter(|((k, _), &h)| *k == i && h).count();
        total += found as f64 / n as f64;
    }
    Ok(total / report.explanations.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Task;
    use crate::explainer::{ClassExplanation, PipelineCounts};
    use crate::graph::tests::{complete, cycle};
    use crate::graph::HeteroGraph;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_cosine(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
        let mut s = 0.0;
        for x in a.rows_f64() {
            for y in b.rows_f64() {
                let (nx, ny) = (x.iter().map(|v| v * v).sum::<f64>().sqrt(), y.iter().map(|v| v * v).sum::<f64>().sqrt());
                if nx > 0.0 && ny > 0.0 {
                    s += x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() / (nx * ny);
                }
            }
        }
        s / (a.n_rows() * b.n_rows()) as f64
    }

    pub(crate) fn report_of(graphs: Vec<HeteroGraph>, probs: &[f64]) -> ExplanationReport {
        ExplanationReport {
            task: Task::GraphClassification,
            classified_type: "node".into(),
            explanations: graphs
                .into_iter()
                .zip(probs)
                .enumerate()
                .map(|(class, (graph, &p))| ClassExplanation {
                    class,
                    candidate: class,
                    node: None,
                    probability: p,
                    probabilities: vec![p],
                    graph,
                })
                .collect(),
            counts: PipelineCounts::default(),
            metrics: None,
        }
    }

    #[test]
    fn cosine_examples() {
        let unit = FeatureMatrix::continuous(2, vec![vec![0.6, 0.8]]).unwrap();
        assert!((feature_cosine(&unit, &unit).unwrap() - 1.0).abs() < 1e-12);
        let x = FeatureMatrix::continuous(2, vec![vec![1.0, 0.0]]).unwrap();
        let y = FeatureMatrix::continuous(2, vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(feature_cosine(&x, &y).unwrap(), 0.0);
        let gen = FeatureMatrix::continuous(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = 0.5f64.sqrt();
        let train = FeatureMatrix::continuous(2, vec![vec![s, s]]).unwrap();
        assert!((feature_cosine(&gen, &train).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let wide = FeatureMatrix::continuous(3, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(feature_cosine(&x, &wide).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cosine_matches_pairwise_oracle(seed in 0u64..10_000, m in 1usize..6, n in 1usize..6) {
            let mut rng = seeded(seed);
            let mut rows = |k: usize| -> Vec<Vec<i64>> {
                (0..k).map(|_| (0..4).map(|_| rng.random_range(0..2)).collect()).collect()
            };
            let a = FeatureMatrix::discrete(vec![0, 1], 4, rows(m)).unwrap();
            let b = FeatureMatrix::discrete(vec![0, 1], 4, rows(n)).unwrap();
            let v = feature_cosine(&a, &b).unwrap();
            prop_assert!((v - brute_cosine(&a, &b)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn predictive_faithfulness_is_the_mean_winning_probability() {
        let r = report_of(vec![cycle(3), cycle(4)], &[0.9, 0.5]);
        assert!((predictive_faithfulness(&r).unwrap() - 0.7).abs() < 1e-12);
        let uniform = report_of(vec![cycle(3), cycle(3), cycle(3)], &[1.0 / 3.0; 3]);
        assert!((predictive_faithfulness(&uniform).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_faithfulness_examples() {
        let r = report_of(vec![cycle(4), complete(4)], &[0.8, 0.8]);
        let own = MotifSet::per_class(vec![vec![cycle(4)], vec![complete(4)]]);
        assert_eq!(ground_truth_faithfulness(&r, &own).unwrap(), 1.0);

        let larger = MotifSet::shared(vec![complete(6)]);
        assert_eq!(ground_truth_faithfulness(&r, &larger).unwrap(), 0.0);

        // class 0: 1 of 1; class 1: triangle yes, 5-cycle no
        let mixed = MotifSet::per_class(vec![vec![cycle(4)], vec![cycle(3), cycle(5)]]);
        assert!((ground_truth_faithfulness(&r, &mixed).unwrap() - 0.75).abs() < 1e-12);

        let missing = MotifSet::per_class(vec![vec![cycle(4)], vec![]]);
        assert!(ground_truth_faithfulness(&r, &missing).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn adding_edges_never_lowers_ground_truth_faithfulness(seed in 0u64..10_000) {
            let mut rng = seeded(seed);
            let mut random = |n: usize, p: f64| {
                let mut edges = Vec::new();
                for i in 0..n as u32 {
                    for j in i + 1..n as u32 {
                        if rng.random_bool(p) {
                            edges.push((i, j));
                        }
                    }
                }
                HeteroGraph::from_edges(n, "node", &edges).unwrap()
            };
            let base: Vec<HeteroGraph> = (0..2).map(|_| random(7, 0.3)).collect();
            let motifs = MotifSet::shared((0..4).map(|_| random(4, 0.6)).collect());
            let mut denser = base.clone();
            for g in &mut denser {
                for _ in 0..5 {
                    let (u, v) = (rng.random_range(0..7), rng.random_range(0..7));
                    if u != v {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            let before = ground_truth_faithfulness(&report_of(base, &[0.5, 0.5]), &motifs).unwrap();
            let after = ground_truth_faithfulness(&report_of(denser, &[0.5, 0.5]), &motifs).unwrap();
            prop_assert!(after >= before);
            prop_assert!((0.0..=1.0).contains(&after));
        }
    }
}
