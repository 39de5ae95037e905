use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeId};
use crate::neural::{relu, relu_backward, softmax_rows, Linear, Matrix, Parameters};

/// Columns appended to every node's feature row: a constant (the learnable
/// type embedding of featureless types) and `ln(1 + degree)`.
pub const STRUCTURAL_INPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnArchitecture {
    pub hidden: usize,
    pub layers: usize,
}

impl Default for GnnArchitecture {
    fn default() -> Self {
        Self { hidden: 32, layers: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnLayer {
    /// Self weights, one per target type.
    pub self_weights: Vec<Linear>,
    /// Message weights, aligned with [`HeteroGnn::relations`].
    pub messages: Vec<Linear>,
}

/// Heterogeneous GraphSAGE-style classifier: per-type input encoders, then
/// `h_v ← ReLU(W_self^τ h_v + Σ_σ W_{σ→τ} mean_{u ∈ N_σ(v)} h_u)` per layer,
/// and a softmax head on classified-type nodes or on the mean-pooled graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroGnn {
    pub task: Task,
    pub classified_type: String,
    pub num_classes: usize,
    pub types: Vec<String>,
    pub feature_widths: Vec<usize>,
    /// Ordered `(source, target)` type-index pairs allowed by the metagraph.
    pub relations: Vec<(usize, usize)>,
    pub encoders: Vec<Linear>,
    pub layers: Vec<GnnLayer>,
    pub head: Linear,
}

/// Per-graph tensors that do not depend on the parameters.
pub struct PreparedGraph {
    n: usize,
    positions: Vec<Vec<usize>>,
    inputs: Vec<Matrix>,
    /// `neighbors[σ][v]`: positions of the type-`σ` neighbors of node `v`.
    neighbors: Vec<Vec<Vec<usize>>>,
    /// Node ids of the classified-type rows, in output order.
    pub classified_ids: Vec<NodeId>,
}

pub struct GnnCache {
    /// Input of every layer, then the final states.
    states: Vec<Matrix>,
    aggregates: Vec<Vec<Matrix>>,
    pre_activations: Vec<Matrix>,
}

fn scatter_rows(target: &mut Matrix, rows: &[usize], values: &Matrix) {
    for (i, &r) in rows.iter().enumerate() {
        target.row_mut(r).copy_from_slice(values.row(i));
    }
}

fn add_rows(target: &mut Matrix, rows: &[usize], values: &Matrix) {
    for (i, &r) in rows.iter().enumerate() {
        for (t, v) in target.row_mut(r).iter_mut().zip(values.row(i)) {
            *t += v;
        }
    }
}

impl HeteroGnn {
    /// `feature_widths` gives the feature width of each metagraph type (in
    /// the metagraph's sorted order); missing entries mean featureless.
    pub fn new<R: Rng + ?Sized>(
        spec: &DatasetSpec,
        feature_widths: &[usize],
        arch: &GnnArchitecture,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        if arch.hidden == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        let types: Vec<String> = spec.metagraph.types.iter().cloned().collect();
        let widths: Vec<usize> = (0..types.len()).map(|i| feature_widths.get(i).copied().unwrap_or(0)).collect();
        let mut relations = Vec::new();
        for (s, a) in types.iter().enumerate() {
            for (t, b) in types.iter().enumerate() {
                if spec.metagraph.allows(a, b) {
                    relations.push((s, t));
                }
            }
        }
        let h = arch.hidden;
        let encoders = widths.iter().map(|&w| Linear::new(w + STRUCTURAL_INPUTS, h, rng)).collect();
        let layers = (0..arch.layers)
            .map(|_| GnnLayer {
                self_weights: types.iter().map(|_| Linear::new(h, h, rng)).collect(),
                messages: relations.iter().map(|_| Linear::new(h, h, rng)).collect(),
            })
            .collect();
        Ok(Self {
            task: spec.task,
            classified_type: spec.classified_type.clone(),
            num_classes: spec.num_classes,
            types,
            feature_widths: widths,
            relations,
            encoders,
            layers,
            head: Linear::new(h, spec.num_classes, rng),
        })
    }

    pub fn hidden(&self) -> usize {
        self.head.input_width()
    }

    fn type_index(&self, ty: &str) -> Result<usize> {
        self.types
            .iter()
            .position(|t| t == ty)
            .ok_or_else(|| Error::InvalidArgument(format!("node type `{ty}` is unknown to the classifier")))
    }

    pub fn prepare(&self, g: &HeteroGraph) -> Result<PreparedGraph> {
        let n = g.node_count();
        let nt = self.types.len();
        let mut type_of = Vec::with_capacity(n);
        for node in g.nodes() {
            type_of.push(self.type_index(&node.ty)?);
        }
        let positions: Vec<Vec<usize>> = (0..nt)
            .map(|t| (0..n).filter(|&p| type_of[p] == t).collect())
            .collect();
        let adj = g.adjacency();
        let mut inputs = Vec::with_capacity(nt);
        for (t, rows) in positions.iter().enumerate() {
            let d = self.feature_widths[t];
            let features = match g.feature(&self.types[t]) {
                Some(m) if m.width() == d => Some(m),
                Some(_) if d == 0 || rows.is_empty() => None,
                Some(m) => {
                    return Err(Error::InvalidFeatures {
                        ty: self.types[t].clone(),
                        reason: format!("width {} but the classifier expects {d}", m.width()),
                    })
                }
                None if d == 0 || rows.is_empty() => None,
                None => {
                    return Err(Error::InvalidFeatures {
                        ty: self.types[t].clone(),
                        reason: "missing features".into(),
                    })
                }
            };
            let mut x = Matrix::zeros(rows.len(), d + STRUCTURAL_INPUTS);
            for (i, &p) in rows.iter().enumerate() {
                let row = x.row_mut(i);
                if let Some(m) = features {
                    row[..d].copy_from_slice(&m.row_f64(g.feature_row(p)));
                }
                row[d] = 1.0;
                row[d + 1] = (adj[p].len() as f64).ln_1p();
            }
            inputs.push(x);
        }
        let neighbors = (0..nt)
            .map(|s| {
                (0..n)
                    .map(|v| adj[v].iter().copied().filter(|&u| type_of[u] == s).collect())
                    .collect()
            })
            .collect();
        let classified = self.type_index(&self.classified_type)?;
        let classified_ids = positions[classified].iter().map(|&p| g.nodes()[p].id).collect();
        Ok(PreparedGraph {
            n,
            positions,
            inputs,
            neighbors,
            classified_ids,
        })
    }

    fn classified_index(&self) -> usize {
        self.types.iter().position(|t| *t == self.classified_type).unwrap()
    }

    /// Logits: one row per classified-type node (node task) or a single row
    /// (graph task).
    pub fn forward(&self, prep: &PreparedGraph) -> (Matrix, GnnCache) {
        let h = self.hidden();
        let mut state = Matrix::zeros(prep.n, h);
        for (t, rows) in prep.positions.iter().enumerate() {
            if !rows.is_empty() {
                scatter_rows(&mut state, rows, &self.encoders[t].forward(&prep.inputs[t]));
            }
        }
        let mut states = vec![state];
        let mut aggregates = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let cur = states.last().unwrap();
            let agg: Vec<Matrix> = prep
                .neighbors
                .iter()
                .map(|by_node| {
                    let mut a = Matrix::zeros(prep.n, h);
                    for (v, nb) in by_node.iter().enumerate() {
                        if nb.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / nb.len() as f64;
                        let row = a.row_mut(v);
                        for &u in nb {
                            for (r, x) in row.iter_mut().zip(cur.row(u)) {
                                *r += x * inv;
                            }
                        }
                    }
                    a
                })
                .collect();
            let mut z = Matrix::zeros(prep.n, h);
            for (t, rows) in prep.positions.iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                let mut zt = layer.self_weights[t].forward(&cur.select_rows(rows));
                for (r, &(s, target)) in self.relations.iter().enumerate() {
                    if target == t {
                        zt.add_assign(&layer.messages[r].forward(&agg[s].select_rows(rows)));
                    }
                }
                scatter_rows(&mut z, rows, &zt);
            }
            states.push(relu(&z));
            aggregates.push(agg);
            pre_activations.push(z);
        }
        let last = states.last().unwrap();
        let logits = match self.task {
            Task::NodeClassification => self.head.forward(&last.select_rows(&prep.positions[self.classified_index()])),
            Task::GraphClassification => self.head.forward(&last.col_means()),
        };
        (
            logits,
            GnnCache {
                states,
                aggregates,
                pre_activations,
            },
        )
    }

    /// Parameter gradients for upstream logit gradient `d_logits`.
    pub fn backward(&self, prep: &PreparedGraph, cache: &GnnCache, d_logits: &Matrix) -> HeteroGnn {
        let mut grad = self.zeros_like();
        let h = self.hidden();
        let last = cache.states.last().unwrap();
        let mut dh = Matrix::zeros(prep.n, h);
        match self.task {
            Task::NodeClassification => {
                let rows = &prep.positions[self.classified_index()];
                let d = self.head.backward(&last.select_rows(rows), d_logits, &mut grad.head);
                scatter_rows(&mut dh, rows, &d);
            }
            Task::GraphClassification => {
                let d = self.head.backward(&last.col_means(), d_logits, &mut grad.head);
                let inv = 1.0 / prep.n.max(1) as f64;
                for v in 0..prep.n {
                    for (o, x) in dh.row_mut(v).iter_mut().zip(d.row(0)) {
                        *o = x * inv;
                    }
                }
            }
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let cur = &cache.states[l];
            let agg = &cache.aggregates[l];
            let dz = relu_backward(&cache.pre_activations[l], &dh);
            let mut d_prev = Matrix::zeros(prep.n, h);
            let mut d_agg: Vec<Matrix> = (0..self.types.len()).map(|_| Matrix::zeros(prep.n, h)).collect();
            for (t, rows) in prep.positions.iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                let dzt = dz.select_rows(rows);
                let g = &mut grad.layers[l];
                let d_self = layer.self_weights[t].backward(&cur.select_rows(rows), &dzt, &mut g.self_weights[t]);
                add_rows(&mut d_prev, rows, &d_self);
                for (r, &(s, target)) in self.relations.iter().enumerate() {
                    if target == t {
                        let d_msg = layer.messages[r].backward(&agg[s].select_rows(rows), &dzt, &mut g.messages[r]);
                        add_rows(&mut d_agg[s], rows, &d_msg);
                    }
                }
            }
            for (s, by_node) in prep.neighbors.iter().enumerate() {
                for (v, nb) in by_node.iter().enumerate() {
                    if nb.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / nb.len() as f64;
                    for &u in nb {
                        for c in 0..h {
                            d_prev[(u, c)] += d_agg[s][(v, c)] * inv;
                        }
                    }
                }
            }
            dh = d_prev;
        }
        for (t, rows) in prep.positions.iter().enumerate() {
            if !rows.is_empty() {
                self.encoders[t].backward(&prep.inputs[t], &dh.select_rows(rows), &mut grad.encoders[t]);
            }
        }
        grad
    }

    pub fn logits(&self, g: &HeteroGraph) -> Result<Matrix> {
        Ok(self.forward(&self.prepare(g)?).0)
    }

    /// Softmax output for every classified-type node of `g`.
    pub fn node_probabilities(&self, g: &HeteroGraph) -> Result<Vec<(NodeId, Vec<f64>)>> {
        if self.task != Task::NodeClassification {
            return Err(Error::InvalidArgument("classifier was trained for graph classification".into()));
        }
        let prep = self.prepare(g)?;
        let probs = softmax_rows(&self.forward(&prep).0);
        Ok(prep
            .classified_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, probs.row(i).to_vec()))
            .collect())
    }
}

pub fn predict_node(model: &HeteroGnn, g: &HeteroGraph, id: NodeId) -> Result<Vec<f64>> {
    let ty = g.node_type(id).ok_or(Error::UnknownNode(id))?;
    if ty != model.classified_type {
        return Err(Error::WrongNodeType {
            node: id,
            found: ty.to_string(),
            expected: model.classified_type.clone(),
        });
    }
    model
        .node_probabilities(g)?
        .into_iter()
        .find(|(n, _)| *n == id)
        .map(|(_, p)| p)
        .ok_or(Error::UnknownNode(id))
}

pub fn predict_graph(model: &HeteroGnn, g: &HeteroGraph) -> Result<Vec<f64>> {
    if model.task != Task::GraphClassification {
        return Err(Error::InvalidArgument("classifier was trained for node classification".into()));
    }
    if g.node_count() == 0 {
        return Err(Error::Empty("cannot classify an empty graph".into()));
    }
    Ok(softmax_rows(&model.logits(g)?).row(0).to_vec())
}

impl Parameters for GnnLayer {
    fn params(&self) -> Vec<&Matrix> {
        self.self_weights.iter().chain(&self.messages).flat_map(|l| l.params()).collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.self_weights
            .iter_mut()
            .chain(&mut self.messages)
            .flat_map(|l| l.params_mut())
            .collect()
    }
}

impl Parameters for HeteroGnn {
    fn params(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.encoders.iter().flat_map(|l| l.params()).collect();
        v.extend(self.layers.iter().flat_map(|l| l.params()));
        v.extend(self.head.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.encoders.iter_mut().flat_map(|l| l.params_mut()).collect();
        v.extend(self.layers.iter_mut().flat_map(|l| l.params_mut()));
        v.extend(self.head.params_mut());
        v
    }
}
