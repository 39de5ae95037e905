//! Graph-transformer denoiser: predicts clean node-type and edge
//! distributions from a noisy dense graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::extra::{augment_extra_features, normalize_extra, EXTRA_FEATURES};
use super::DenseGraphState;
use crate::error::Result;
use crate::neural::{
    relu, relu_backward, softmax_rows, AttentionCache, AttentionLayer, Linear, Matrix, Parameters,
};

/// Pair input columns: no-edge, edge, diagonal marker, `t/T`.
const PAIR_INPUT: usize = 4;
/// Graph-level columns broadcast to nodes besides the type histogram: edge
/// density and mean per-node triangle, 4-cycle and 5-cycle counts.
const GLOBAL_INPUT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTransformer {
    pub node_types: usize,
    pub node_in: Linear,
    pub edge_in: Linear,
    pub layers: Vec<AttentionLayer>,
    pub node_hidden: Linear,
    pub node_head: Linear,
    pub edge_hidden: Linear,
    pub edge_head: Linear,
}

pub struct TransformerCache {
    x0: Matrix,
    e0: Matrix,
    h_pre: Matrix,
    e_pre: Matrix,
    layers: Vec<AttentionCache>,
    h_last: Matrix,
    e_last: Matrix,
    node_mid: Matrix,
    edge_mid: Matrix,
}

/// Raw network outputs. Edge logits are `n² × 2` (row `i·n + j`) and
/// symmetric in `(i, j)`.
pub struct DenoiserOutput {
    pub node_logits: Matrix,
    pub edge_logits: Matrix,
}

impl DenoiserOutput {
    pub fn node_probs(&self) -> Matrix {
        softmax_rows(&self.node_logits)
    }

    pub fn edge_probs(&self) -> Matrix {
        softmax_rows(&self.edge_logits)
    }
}

impl GraphTransformer {
    pub fn new<R: Rng + ?Sized>(
        node_types: usize,
        hidden: usize,
        layers: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let node_in = Linear::new(Self::node_input_width(node_types), hidden, rng);
        let edge_in = Linear::new(PAIR_INPUT, hidden, rng);
        let layers = (0..layers)
            .map(|_| AttentionLayer::new(hidden, heads, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            node_types,
            node_in,
            edge_in,
            layers,
            node_hidden: Linear::new(hidden, hidden, rng),
            node_head: Linear::new(hidden, node_types, rng),
            edge_hidden: Linear::new(hidden, hidden, rng),
            edge_head: Linear::new(hidden, 2, rng),
        })
    }

    fn node_input_width(node_types: usize) -> usize {
        2 * node_types + EXTRA_FEATURES + GLOBAL_INPUT + 1
    }

    /// Node rows: own type one-hot, extra features, type histogram, global
    /// structure summary, `t/T`.
    fn inputs(&self, g: &DenseGraphState, t_frac: f64) -> (Matrix, Matrix) {
        let n = g.n();
        let k = self.node_types;
        let raw = augment_extra_features(g);
        let extra = normalize_extra(&raw);
        let mut global = vec![0.0; k + GLOBAL_INPUT];
        for &t in &g.node_types {
            global[t] += 1.0 / n as f64;
        }
        let pairs = (n * n.saturating_sub(1)).max(1) as f64;
        global[k] = g.degrees().iter().sum::<usize>() as f64 / pairs;
        for c in 0..3 {
            global[k + 1 + c] = ((0..n).map(|i| raw[(i, c)]).sum::<f64>() / n.max(1) as f64).ln_1p();
        }
        let width = Self::node_input_width(k);
        let mut x = Matrix::zeros(n, width);
        for i in 0..n {
            x[(i, g.node_types[i])] = 1.0;
            for c in 0..EXTRA_FEATURES {
                x[(i, k + c)] = extra[(i, c)];
            }
            for (c, &v) in global.iter().enumerate() {
                x[(i, k + EXTRA_FEATURES + c)] = v;
            }
            x[(i, width - 1)] = t_frac;
        }
        let mut e = Matrix::zeros(n * n, PAIR_INPUT);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                if i == j {
                    e[(r, 2)] = 1.0;
                } else {
                    e[(r, g.edge(i, j) as usize)] = 1.0;
                }
                e[(r, 3)] = t_frac;
            }
        }
        (x, e)
    }

    /// `t_frac` is `t / T`.
    pub fn forward(&self, g: &DenseGraphState, t_frac: f64) -> Result<(DenoiserOutput, TransformerCache)> {
        let n = g.n();
        let (x0, e0) = self.inputs(g, t_frac);
        let h_pre = self.node_in.forward(&x0);
        let e_pre = self.edge_in.forward(&e0);
        let mut h = relu(&h_pre);
        let mut e = relu(&e_pre);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (h2, e2, cache) = layer.forward(&h, &e)?;
            h = h2;
            e = e2;
            caches.push(cache);
        }
        let node_mid = self.node_hidden.forward(&h);
        let node_logits = self.node_head.forward(&relu(&node_mid));
        let edge_mid = self.edge_hidden.forward(&e);
        let raw = self.edge_head.forward(&relu(&edge_mid));
        let mut edge_logits = Matrix::zeros(n * n, 2);
        for i in 0..n {
            for j in 0..n {
                for c in 0..2 {
                    edge_logits[(i * n + j, c)] = 0.5 * (raw[(i * n + j, c)] + raw[(j * n + i, c)]);
                }
            }
        }
        Ok((
            DenoiserOutput {
                node_logits,
                edge_logits,
            },
            TransformerCache {
                x0,
                e0,
                h_pre,
                e_pre,
                layers: caches,
                h_last: h,
                e_last: e,
                node_mid,
                edge_mid,
            },
        ))
    }

    /// Parameter gradients for upstream gradients on the logits.
    pub fn backward(&self, c: &TransformerCache, d_node: &Matrix, d_edge: &Matrix) -> GraphTransformer {
        let mut grad = self.zeros_like();
        let n = c.h_last.rows();
        let mut d_raw = Matrix::zeros(n * n, 2);
        for i in 0..n {
            for j in 0..n {
                for k in 0..2 {
                    d_raw[(i * n + j, k)] = 0.5 * (d_edge[(i * n + j, k)] + d_edge[(j * n + i, k)]);
                }
            }
        }
        let node_act = relu(&c.node_mid);
        let d_node_act = self.node_head.backward(&node_act, d_node, &mut grad.node_head);
        let d_node_mid = relu_backward(&c.node_mid, &d_node_act);
        let mut dh = self.node_hidden.backward(&c.h_last, &d_node_mid, &mut grad.node_hidden);
        let edge_act = relu(&c.edge_mid);
        let d_edge_act = self.edge_head.backward(&edge_act, &d_raw, &mut grad.edge_head);
        let d_edge_mid = relu_backward(&c.edge_mid, &d_edge_act);
        let mut de = self.edge_hidden.backward(&c.e_last, &d_edge_mid, &mut grad.edge_hidden);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (dh2, de2) = layer.backward(&c.layers[idx], &dh, &de, &mut grad.layers[idx]);
            dh = dh2;
            de = de2;
        }
        let dh_pre = relu_backward(&c.h_pre, &dh);
        self.node_in.backward(&c.x0, &dh_pre, &mut grad.node_in);
        let de_pre = relu_backward(&c.e_pre, &de);
        self.edge_in.backward(&c.e0, &de_pre, &mut grad.edge_in);
        grad
    }
}

impl Parameters for GraphTransformer {
    fn params(&self) -> Vec<&Matrix> {
        let mut out = self.node_in.params();
        out.extend(self.edge_in.params());
        for l in &self.layers {
            out.extend(l.params());
        }
        out.extend(self.node_hidden.params());
        out.extend(self.node_head.params());
        out.extend(self.edge_hidden.params());
        out.extend(self.edge_head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.node_in.params_mut();
        out.extend(self.edge_in.params_mut());
        for l in &mut self.layers {
            out.extend(l.params_mut());
        }
        out.extend(self.node_hidden.params_mut());
        out.extend(self.node_head.params_mut());
        out.extend(self.edge_hidden.params_mut());
        out.extend(self.edge_head.params_mut());
        out
    }
}
