//! The six pipeline stages. Each reads its upstream artifacts from the store,
//! writes its own, and records a manifest.

use std::collections::BTreeMap;

use diffexplain::datasets::{
    build_corpus, gen_ba3motif, gen_ba_shapes, gen_tree_motif, CorpusSource, DatasetSpec, ForestFireConfig, Motif,
    SampledCorpus, Task,
};
use diffexplain::evaluation::{evaluate_report, extract_motifs, MetricBlock, MotifSet};
use diffexplain::explainer::{generate_candidates, select_explanations, top_k_explanations, CandidateSet, ExplanationReport, Selection};
use diffexplain::feature_diffusion::{plan_generators, FeatureBank, FeatureGeneratorPlan, FeatureModel};
use diffexplain::gnn::{train_gnn, TrainedGnn};
use diffexplain::graph::{extract_metagraph, load_hetero_graph};
use diffexplain::graph_diffusion::{GraphDenoiser, ModelBank};
use diffexplain::rng::{derive, seeded};
use diffexplain::{HeteroGraph, Metagraph};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, PipelineConfig};
use crate::error::{CliError, Result, StageContext};
use crate::store::{hash_json, Manifest, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sample,
    TrainGraph,
    TrainFeat,
    TrainGnn,
    Explain,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Sample,
        Stage::TrainGraph,
        Stage::TrainFeat,
        Stage::TrainGnn,
        Stage::Explain,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sample => "sample",
            Stage::TrainGraph => "train-graph",
            Stage::TrainFeat => "train-feat",
            Stage::TrainGnn => "train-gnn",
            Stage::Explain => "explain",
            Stage::Evaluate => "evaluate",
        }
    }

    fn stream(self) -> u64 {
        Stage::ALL.iter().position(|&s| s == self).unwrap() as u64 + 1
    }

    fn uses_runs(self) -> bool {
        matches!(self, Stage::Explain | Stage::Evaluate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub runs: usize,
    pub force: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { runs: 1, force: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ran { artifacts: Vec<String> },
    /// The manifest matched; nothing was recomputed.
    Skipped,
}

/// Real graphs of the dataset with the resolved spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetArtifact {
    pub spec: DatasetSpec,
    pub graphs: Vec<HeteroGraph>,
}

/// Mean and spread of the per-run metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub runs: Vec<MetricBlock>,
    pub predictive_faithfulness_mean: f64,
    pub predictive_faithfulness_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_faithfulness_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_faithfulness_std: Option<f64>,
}

#[derive(Serialize)]
struct HashInput<'a> {
    stage: &'static str,
    config: &'a PipelineConfig,
    runs: Option<usize>,
}

pub fn dataset_name(config: &PipelineConfig) -> &str {
    &config.dataset.name
}

pub fn artifact(config: &PipelineConfig, kind: &str) -> String {
    format!("{kind}_{}", dataset_name(config))
}

pub fn run_artifact(config: &PipelineConfig, kind: &str, run: usize) -> String {
    format!("{kind}_{}_run{run}", dataset_name(config))
}

/// Run one stage unless its manifest is current.
pub fn run_stage(config: &PipelineConfig, stage: Stage, opts: &RunOptions) -> Result<Outcome> {
    if opts.runs == 0 {
        return Err(CliError::Config {
            path: "--runs".into(),
            reason: "runs must be at least 1".into(),
        });
    }
    let store = Store::open(&config.out)?;
    // the output location does not change what is computed
    let mut hashed = config.clone();
    hashed.out = Default::default();
    let config_hash = hash_json(&HashInput {
        stage: stage.name(),
        config: &hashed,
        runs: stage.uses_runs().then_some(opts.runs),
    });
    if !opts.force && store.is_current(stage.name(), &config_hash) {
        log::info!("{}: up to date", stage.name());
        return Ok(Outcome::Skipped);
    }
    let stage_seed = derive(config.seed, stage.stream()).next_u64();
    let artifacts = match stage {
        Stage::Sample => sample(config, &store, stage_seed)?,
        Stage::TrainGraph => train_graph(config, &store, stage_seed)?,
        Stage::TrainFeat => train_feat(config, &store, stage_seed)?,
        Stage::TrainGnn => train_classifier(config, &store, stage_seed)?,
        Stage::Explain => explain(config, &store, stage_seed, opts.runs)?,
        Stage::Evaluate => evaluate(config, &store, opts.runs)?,
    };
    store.write_manifest(&Manifest {
        stage: stage.name().into(),
        config_hash,
        seed: config.seed,
        stage_seed,
        artifacts: artifacts.clone(),
    })?;
    Ok(Outcome::Ran { artifacts })
}

fn load_source(config: &PipelineConfig, seed: u64) -> Result<Vec<HeteroGraph>> {
    const STAGE: &str = "sample";
    let mut rng = seeded(seed);
    let graphs = match &config.dataset.source {
        DataSource::File { path } => {
            let bytes = std::fs::read(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            match load_hetero_graph(&bytes) {
                Ok(g) => vec![g],
                Err(_) => serde_json::from_slice::<Vec<HeteroGraph>>(&bytes).map_err(|source| CliError::Json {
                    path: path.clone(),
                    source,
                })?,
            }
        }
        &DataSource::BaShapes { base_nodes, motifs } => vec![gen_ba_shapes(base_nodes, motifs, &mut rng)],
        &DataSource::TreeCycle { depth, motifs } => vec![gen_tree_motif(depth, Motif::Cycle(6), motifs, &mut rng)],
        &DataSource::TreeGrid { depth, motifs } => vec![gen_tree_motif(depth, Motif::Grid(3), motifs, &mut rng)],
        &DataSource::Ba3Motif { graphs } => gen_ba3motif(graphs, &mut rng),
    };
    for g in &graphs {
        g.validate().stage(STAGE)?;
    }
    if graphs.is_empty() {
        return Err(CliError::Pipeline {
            stage: STAGE,
            source: diffexplain::Error::Empty("dataset has no graphs".into()),
        });
    }
    if config.dataset.task == Task::NodeClassification && graphs.len() != 1 {
        return Err(CliError::Pipeline {
            stage: STAGE,
            source: diffexplain::Error::InvalidArgument(format!(
                "node classification expects one graph, found {}",
                graphs.len()
            )),
        });
    }
    Ok(graphs)
}

fn union_metagraph(graphs: &[HeteroGraph]) -> Metagraph {
    let mut meta = Metagraph::new(Vec::<String>::new());
    for g in graphs {
        let m = extract_metagraph(g);
        meta.types.extend(m.types);
        meta.type_edges.extend(m.type_edges);
    }
    meta
}

fn sample(config: &PipelineConfig, store: &Store, seed: u64) -> Result<Vec<String>> {
    const STAGE: &str = "sample";
    let graphs = load_source(config, derive(seed, 0).next_u64())?;
    let metagraph = config.dataset.metagraph.clone().unwrap_or_else(|| union_metagraph(&graphs));
    let spec = config.spec(metagraph);
    spec.validate().stage(STAGE)?;
    let fire = ForestFireConfig {
        burn_probability: config.sampling.burn_probability,
        max_attempts: config.sampling.max_attempts,
    };
    let source = || match spec.task {
        Task::NodeClassification => CorpusSource::Single(&graphs[0]),
        Task::GraphClassification => CorpusSource::Collection(&graphs),
    };
    let corpus = build_corpus(
        source(),
        config.sizes(),
        config.sampling.per_size,
        &spec.classified_type,
        &fire,
        &mut seeded(derive(seed, 1).next_u64()),
    )
    .stage(STAGE)?;
    let held_out = build_corpus(
        source(),
        config.sizes(),
        config.sampling.held_out_per_size.max(1),
        &spec.classified_type,
        &fire,
        &mut seeded(derive(seed, 2).next_u64()),
    )
    .stage(STAGE)?;
    log::info!("sample: {} training graphs, {} held out", corpus.total(), held_out.total());
    let names = vec![artifact(config, "dataset"), artifact(config, "corpus"), artifact(config, "heldout")];
    store.write(&names[0], &DatasetArtifact { spec, graphs })?;
    store.write(&names[1], &corpus)?;
    store.write(&names[2], &held_out)?;
    Ok(names)
}

fn load_dataset(config: &PipelineConfig, store: &Store, stage: &'static str) -> Result<DatasetArtifact> {
    store.require(stage, "sample", &artifact(config, "dataset"))
}

fn load_corpus(config: &PipelineConfig, store: &Store, stage: &'static str, kind: &str) -> Result<SampledCorpus> {
    store.require(stage, "sample", &artifact(config, kind))
}

fn denoiser_name(config: &PipelineConfig, n: usize) -> String {
    format!("graph_denoiser_{}_{n}", dataset_name(config))
}

fn train_graph(config: &PipelineConfig, store: &Store, seed: u64) -> Result<Vec<String>> {
    const STAGE: &str = "train-graph";
    let dataset = load_dataset(config, store, STAGE)?;
    let corpus = load_corpus(config, store, STAGE, "corpus")?;
    // collections may leave some sizes without graphs
    let buckets: BTreeMap<usize, Vec<HeteroGraph>> =
        corpus.buckets.into_iter().filter(|(_, b)| !b.is_empty()).collect();
    let vocab: Vec<String> = dataset.spec.metagraph.types.iter().cloned().collect();
    let bank = ModelBank::train(&buckets, &vocab, &config.graph_diffusion, seed).stage(STAGE)?;
    let mut names = Vec::new();
    for (&n, model) in &bank.models {
        log::info!("train-graph: size {n}, final loss {:.4}", model.final_loss().unwrap_or(f64::NAN));
        let name = denoiser_name(config, n);
        store.write(&name, model)?;
        names.push(name);
    }
    Ok(names)
}

/// Plan plus the classified type; the per-generator models live in their
/// own artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlanArtifact {
    pub plan: FeatureGeneratorPlan,
    pub classified_type: String,
}

fn feature_name(config: &PipelineConfig, suffix: &str) -> String {
    format!("feat_{}_{suffix}", dataset_name(config))
}

fn train_feat(config: &PipelineConfig, store: &Store, seed: u64) -> Result<Vec<String>> {
    const STAGE: &str = "train-feat";
    let dataset = load_dataset(config, store, STAGE)?;
    let corpus = load_corpus(config, store, STAGE, "corpus")?;
    let samples: Vec<HeteroGraph> = corpus.graphs().cloned().collect();
    let plan = plan_generators(&dataset.spec, &samples).stage(STAGE)?;
    let bank = FeatureBank::train(
        &plan,
        &dataset.spec,
        &samples,
        &config.feature_diffusion,
        &config.continuous_diffusion,
        seed,
    )
    .stage(STAGE)?;
    let plan_name = feature_name(config, "plan");
    store.write(
        &plan_name,
        &FeaturePlanArtifact {
            plan: bank.plan.clone(),
            classified_type: bank.classified_type.clone(),
        },
    )?;
    let mut names = vec![plan_name];
    for (suffix, model) in &bank.models {
        let name = feature_name(config, suffix);
        store.write(&name, model)?;
        names.push(name);
    }
    log::info!("train-feat: {} generators", bank.models.len());
    Ok(names)
}

fn train_classifier(config: &PipelineConfig, store: &Store, seed: u64) -> Result<Vec<String>> {
    const STAGE: &str = "train-gnn";
    let dataset = load_dataset(config, store, STAGE)?;
    let training = diffexplain::gnn::TrainConfig {
        seed,
        ..config.gnn.training.clone()
    };
    let trained = train_gnn(&dataset.graphs, &dataset.spec, &config.gnn.architecture, &training).stage(STAGE)?;
    let best = trained.history[trained.best_epoch];
    log::info!(
        "train-gnn: best epoch {} of {}, validation accuracy {:.3}",
        trained.best_epoch,
        trained.history.len(),
        best.val_accuracy
    );
    let name = artifact(config, "gnn");
    store.write(&name, &trained)?;
    Ok(vec![name])
}

fn load_bank(store: &Store, stage: &'static str, config: &PipelineConfig) -> Result<ModelBank> {
    let manifest = store.manifest("train-graph").ok_or_else(|| CliError::MissingStage {
        stage,
        upstream: "train-graph",
        path: store.path("train-graph.manifest"),
    })?;
    let mut bank = ModelBank::default();
    for n in config.sizes().sizes() {
        let name = denoiser_name(config, n);
        if manifest.artifacts.contains(&name) {
            let model: GraphDenoiser = store.require(stage, "train-graph", &name)?;
            bank.models.insert(n, model);
        }
    }
    Ok(bank)
}

fn load_features(store: &Store, stage: &'static str, config: &PipelineConfig) -> Result<FeatureBank> {
    let plan: FeaturePlanArtifact = store.require(stage, "train-feat", &feature_name(config, "plan"))?;
    let mut models = BTreeMap::new();
    for entry in plan.plan.generators() {
        let suffix = entry.artifact_suffix();
        let model: FeatureModel = store.require(stage, "train-feat", &feature_name(config, &suffix))?;
        models.insert(suffix, model);
    }
    Ok(FeatureBank {
        plan: plan.plan,
        classified_type: plan.classified_type,
        models,
    })
}

fn explain(config: &PipelineConfig, store: &Store, seed: u64, runs: usize) -> Result<Vec<String>> {
    const STAGE: &str = "explain";
    let dataset = load_dataset(config, store, STAGE)?;
    let bank = load_bank(store, STAGE, config)?;
    let features = load_features(store, STAGE, config)?;
    let gnn: TrainedGnn = store.require(STAGE, "train-gnn", &artifact(config, "gnn"))?;
    let mut names = Vec::new();
    for run in 0..runs {
        let mut rng = seeded(derive(seed, run as u64).next_u64());
        let candidates = generate_candidates(&bank, Some(&features), config.explain.per_size, &dataset.spec, &mut rng)
            .stage(STAGE)?;
        let report = select_explanations(&candidates, &gnn.model).stage(STAGE)?;
        log::info!(
            "explain run {run}: {} generated, {} connected, {} valid",
            candidates.counts.generated,
            candidates.counts.connected,
            candidates.counts.valid
        );
        let cand_name = run_artifact(config, "candidates", run);
        let report_name = run_artifact(config, "report", run);
        store.write(&cand_name, &candidates)?;
        store.write(&report_name, &report)?;
        names.extend([cand_name, report_name]);
        if config.explain.top_k > 1 {
            let top: Vec<Vec<Selection>> = top_k_explanations(&candidates, &gnn.model, config.explain.top_k).stage(STAGE)?;
            let name = run_artifact(config, "topk", run);
            store.write(&name, &top)?;
            names.push(name);
        }
    }
    Ok(names)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn evaluate(config: &PipelineConfig, store: &Store, runs: usize) -> Result<Vec<String>> {
    const STAGE: &str = "evaluate";
    let dataset = load_dataset(config, store, STAGE)?;
    let held_out = load_corpus(config, store, STAGE, "heldout")?;
    let real: Vec<HeteroGraph> = held_out.graphs().cloned().collect();
    let motifs: MotifSet =
        extract_motifs(&real, &dataset.spec, config.evaluate.per_class_motifs, config.evaluate.max_motifs).stage(STAGE)?;
    let motif_name = artifact(config, "motifs");
    store.write(&motif_name, &motifs)?;
    let mut names = vec![motif_name];
    let mut blocks = Vec::new();
    for run in 0..runs {
        let candidates: CandidateSet = store.require(STAGE, "explain", &run_artifact(config, "candidates", run))?;
        let mut report: ExplanationReport = store.require(STAGE, "explain", &run_artifact(config, "report", run))?;
        let generated: Vec<HeteroGraph> = candidates.graphs().cloned().collect();
        let block = evaluate_report(&report, &generated, &real, Some(&motifs)).stage(STAGE)?;
        report.metrics = Some(block.clone());
        let name = run_artifact(config, "evaluated", run);
        store.write(&name, &report)?;
        names.push(name);
        blocks.push(block);
    }
    let pf: Vec<f64> = blocks.iter().map(|b| b.predictive_faithfulness).collect();
    let gf: Option<Vec<f64>> = blocks.iter().map(|b| b.ground_truth_faithfulness).collect();
    let (pf_mean, pf_std) = mean_std(&pf);
    let gf_stats = gf.map(|v| mean_std(&v));
    log::info!("evaluate: predictive faithfulness {pf_mean:.4} ± {pf_std:.4}");
    let summary = EvaluationSummary {
        runs: blocks,
        predictive_faithfulness_mean: pf_mean,
        predictive_faithfulness_std: pf_std,
        ground_truth_faithfulness_mean: gf_stats.map(|s| s.0),
        ground_truth_faithfulness_std: gf_stats.map(|s| s.1),
    };
    let name = artifact(config, "evaluation");
    store.write(&name, &summary)?;
    names.push(name);
    Ok(names)
}
