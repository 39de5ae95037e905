//! Heterogeneous pipeline on the toy bibliographic fixture with tiny models:
//! corpus, structure and feature generators, classifier, candidates,
//! selection and metrics.

use diffexplain::datasets::{build_corpus, CorpusSource, DatasetSpec, ForestFireConfig, SizeRange, Task};
use diffexplain::evaluation::{evaluate_report, extract_motifs, predictive_faithfulness};
use diffexplain::explainer::{generate_candidates, select_node_explanations, top_k_explanations, ExplanationReport};
use diffexplain::feature_diffusion::{plan_generators, ContinuousDiffusionConfig, FeatureBank, FeatureDiffusionConfig};
use diffexplain::gnn::{predict_node, train_gnn, GnnArchitecture, TrainConfig};
use diffexplain::graph::{extract_metagraph, is_connected, is_valid_wrt_metagraph, load_hetero_graph};
use diffexplain::graph_diffusion::{GraphDiffusionConfig, ModelBank};
use diffexplain::rng::seeded;
use diffexplain::HeteroGraph;

fn dblp_toy() -> HeteroGraph {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/dblp_toy.json");
    load_hetero_graph(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn heterogeneous_pipeline_end_to_end() {
    let g = dblp_toy();
    let spec = DatasetSpec {
        name: "dblp_toy".into(),
        task: Task::NodeClassification,
        classified_type: "author".into(),
        num_classes: 4,
        metagraph: extract_metagraph(&g),
    };
    let mut rng = seeded(5);
    let corpus = build_corpus(
        CorpusSource::Single(&g),
        SizeRange::new(5, 6).unwrap(),
        12,
        "author",
        &ForestFireConfig::default(),
        &mut rng,
    )
    .unwrap();
    let samples: Vec<HeteroGraph> = corpus.graphs().cloned().collect();

    let graph_config = GraphDiffusionConfig {
        diffusion_steps: 20,
        hidden: 16,
        layers: 1,
        heads: 2,
        learning_rate: 1e-3,
        train_steps: 800,
        ..Default::default()
    };
    let bank = ModelBank::train(&corpus.buckets, &g.types(), &graph_config, 1).unwrap();
    assert_eq!(bank.sizes(), vec![5, 6]);

    let plan = plan_generators(&spec, &samples).unwrap();
    let disc = FeatureDiffusionConfig {
        diffusion_steps: 20,
        hidden: 16,
        blocks: 1,
        time_width: 8,
        train_steps: 40,
        ..Default::default()
    };
    let cont = ContinuousDiffusionConfig {
        diffusion_steps: 20,
        hidden: 16,
        blocks: 1,
        time_width: 8,
        batch_size: 16,
        train_steps: 40,
        ..Default::default()
    };
    let features = FeatureBank::train(&plan, &spec, &samples, &disc, &cont, 2).unwrap();

    let gnn = train_gnn(
        std::slice::from_ref(&g),
        &spec,
        &GnnArchitecture { hidden: 8, layers: 2 },
        &TrainConfig { max_epochs: 30, ..Default::default() },
    )
    .unwrap()
    .model;

    let candidates = generate_candidates(&bank, Some(&features), 24, &spec, &mut seeded(9)).unwrap();
    let c = candidates.counts;
    assert_eq!(c.generated, 48);
    assert!(c.valid <= c.connected && c.connected <= c.generated);
    assert_eq!(c.valid, candidates.len());
    for cand in &candidates.candidates {
        assert!(is_connected(&cand.graph));
        assert!(is_valid_wrt_metagraph(&cand.graph, &spec.metagraph));
        cand.graph.validate().unwrap();
        for ty in ["author", "paper", "term"] {
            let count = cand.graph.positions_of_type(ty).len();
            if count > 0 {
                assert_eq!(cand.graph.feature(ty).unwrap().n_rows(), count);
            }
        }
    }

    let report = select_node_explanations(&candidates, &gnn).unwrap();
    assert_eq!(report.explanations.len(), 4);
    for e in &report.explanations {
        let cand = &candidates.candidates[e.candidate];
        assert_eq!(cand.graph, e.graph);
        let node = e.node.unwrap();
        let p = predict_node(&gnn, &e.graph, node).unwrap();
        assert!((p[e.class] - e.probability).abs() < 1e-12);
        // no other candidate node beats the winner
        for other in &candidates.candidates {
            for (_, probs) in gnn.node_probabilities(&other.graph).unwrap() {
                assert!(probs[e.class] <= e.probability);
            }
        }
    }
    let top = top_k_explanations(&candidates, &gnn, 3).unwrap();
    for (class, list) in top.iter().enumerate() {
        assert_eq!(list[0].candidate, report.explanations[class].candidate);
        assert!(list.windows(2).all(|w| w[0].probability >= w[1].probability));
    }

    let motifs = extract_motifs(&samples, &spec, true, 30).unwrap();
    let generated: Vec<HeteroGraph> = candidates.graphs().cloned().collect();
    let metrics = evaluate_report(&report, &generated, &samples, Some(&motifs)).unwrap();
    assert_eq!(metrics.predictive_faithfulness, predictive_faithfulness(&report).unwrap());
    let gf = metrics.ground_truth_faithfulness.unwrap();
    assert!((0.0..=1.0).contains(&gf));
    let s = metrics.structure.unwrap();
    assert!(s.degree >= 0.0 && s.clustering >= 0.0 && s.spectrum >= 0.0 && s.node_types >= 0.0);
    assert!(metrics.feature_cosine.contains_key("author"));

    let mut with_metrics = report.clone();
    with_metrics.metrics = Some(metrics);
    let text = serde_json::to_string(&with_metrics).unwrap();
    let back: ExplanationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, with_metrics);
}
