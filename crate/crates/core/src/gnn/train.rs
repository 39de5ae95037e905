use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{GnnArchitecture, HeteroGnn, PreparedGraph};
use crate::datasets::{DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::neural::{cross_entropy_indices, AdamConfig, AdamState, Matrix, Parameters};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            weight_decay: 5e-4,
            max_epochs: 500,
            patience: 100,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGnn {
    /// Parameters of the best validation epoch.
    pub model: HeteroGnn,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// One labeled target: a graph, the output row inside it, and the class.
#[derive(Debug, Clone, Copy)]
struct Example {
    graph: usize,
    row: usize,
    class: usize,
}

fn feature_widths(spec: &DatasetSpec, graphs: &[HeteroGraph]) -> Result<Vec<usize>> {
    spec.metagraph
        .types
        .iter()
        .map(|ty| {
            let mut width = None;
            for m in graphs.iter().filter_map(|g| g.feature(ty)) {
                match width {
                    None => width = Some(m.width()),
                    Some(w) if w != m.width() => {
                        return Err(Error::InvalidFeatures {
                            ty: ty.clone(),
                            reason: "feature width differs between graphs".into(),
                        })
                    }
                    Some(_) => {}
                }
            }
            Ok(width.unwrap_or(0))
        })
        .collect()
}

fn collect_examples(spec: &DatasetSpec, graphs: &[HeteroGraph], prepared: &[PreparedGraph]) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (gi, (g, prep)) in graphs.iter().zip(prepared).enumerate() {
        match spec.task {
            Task::NodeClassification => {
                for (row, &id) in prep.classified_ids.iter().enumerate() {
                    if let Some(class) = g.label(id) {
                        out.push(Example { graph: gi, row, class });
                    }
                }
            }
            Task::GraphClassification => {
                if let Some(class) = g.graph_label() {
                    out.push(Example { graph: gi, row: 0, class });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no labeled `{}` targets", spec.classified_type)));
    }
    if let Some(e) = out.iter().find(|e| e.class >= spec.num_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {} outside {} classes",
            e.class, spec.num_classes
        )));
    }
    Ok(out)
}

/// Mean cross-entropy of `examples`, the number correct, and the parameter
/// gradient of the mean loss.
fn evaluate(
    model: &HeteroGnn,
    prepared: &[PreparedGraph],
    examples: &[Example],
    with_grad: bool,
) -> (f64, usize, Option<HeteroGnn>) {
    let mut by_graph: Vec<Vec<&Example>> = vec![Vec::new(); prepared.len()];
    for e in examples {
        by_graph[e.graph].push(e);
    }
    let total = examples.len().max(1) as f64;
    let parts: Vec<(f64, usize, Option<HeteroGnn>)> = by_graph
        .par_iter()
        .enumerate()
        .filter(|(_, ex)| !ex.is_empty())
        .map(|(gi, ex)| {
            let (logits, cache) = model.forward(&prepared[gi]);
            let rows: Vec<usize> = ex.iter().map(|e| e.row).collect();
            let targets: Vec<usize> = ex.iter().map(|e| e.class).collect();
            let picked = logits.select_rows(&rows);
            let (loss, d_picked) = cross_entropy_indices(&picked, &targets);
            let correct = (0..rows.len())
                .filter(|&i| {
                    let r = picked.row(i);
                    let best = (0..r.len()).fold(0, |b, c| if r[c] > r[b] { c } else { b });
                    best == targets[i]
                })
                .count();
            let weight = ex.len() as f64 / total;
            let grad = with_grad.then(|| {
                let mut d_logits = Matrix::zeros(logits.rows(), logits.cols());
                for (i, &r) in rows.iter().enumerate() {
                    for c in 0..logits.cols() {
                        d_logits[(r, c)] += d_picked[(i, c)] * weight;
                    }
                }
                model.backward(&prepared[gi], &cache, &d_logits)
            });
            (loss * weight, correct, grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad: Option<HeteroGnn> = None;
    for (l, c, g) in parts {
        loss += l;
        correct += c;
        if let Some(g) = g {
            match grad.as_mut() {
                Some(acc) => acc.accumulate(&g),
                None => grad = Some(g),
            }
        }
    }
    (loss, correct, grad)
}

/// Adam on the training split with full-batch steps. The validation score
/// is accuracy, with lower validation loss breaking ties; training stops
/// after `patience` epochs without improvement and returns the best epoch's
/// parameters.
pub fn train_gnn(
    graphs: &[HeteroGraph],
    spec: &DatasetSpec,
    arch: &GnnArchitecture,
    config: &TrainConfig,
) -> Result<TrainedGnn> {
    if config.patience == 0 {
        return Err(Error::InvalidArgument("patience must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::InvalidArgument("validation fraction must lie in [0, 1)".into()));
    }
    let mut rng = seeded(config.seed);
    let widths = feature_widths(spec, graphs)?;
    let mut model = HeteroGnn::new(spec, &widths, arch, &mut rng)?;
    let prepared = graphs.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>>>()?;
    let mut examples = collect_examples(spec, graphs, &prepared)?;
    examples.shuffle(&mut rng);
    let n_val = ((examples.len() as f64 * config.validation_fraction).round() as usize).min(examples.len() - 1);
    let (val, train) = examples.split_at(n_val);
    // without a held-out split, early stopping watches the training set
    let val = if val.is_empty() { train } else { val };

    let mut adam = AdamState::new(
        AdamConfig::with_lr(config.learning_rate, config.weight_decay),
        model.num_params(),
    );
    let mut history = Vec::new();
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY, f64::INFINITY);
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        let (train_loss, _, grad) = evaluate(&model, &prepared, train, true);
        let (val_loss, correct, _) = evaluate(&model, &prepared, val, false);
        let val_accuracy = correct as f64 / val.len() as f64;
        history.push(EpochRecord {
            train_loss,
            val_loss,
            val_accuracy,
        });
        if val_accuracy > best.2 || (val_accuracy == best.2 && val_loss < best.3) {
            best = (model.clone(), epoch, val_accuracy, val_loss);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
        adam.step(&mut model, &grad.expect("training split is non-empty"));
    }
    log::debug!(
        "gnn trained {} epochs, best epoch {} (val acc {:.3})",
        history.len(),
        best.1,
        best.2
    );
    Ok(TrainedGnn {
        model: best.0,
        history,
        best_epoch: best.1,
    })
}
