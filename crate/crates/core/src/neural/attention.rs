//! Graph-transformer layer over node states (`n × H`) and pairwise edge
//! states (`n² × H`, row `i·n + j` holds pair `(i, j)`).
//!
//! Per feature channel `f`, the pair score is
//! `Y_ijf = q_if·k_jf/√d_head · (1 + E1_ijf) + E2_ijf`, where `E1`, `E2` are
//! linear maps of the edge state. Head `h` attends with
//! `softmax_j(Σ_{f∈h} Y_ijf)`; the new edge state is read from `Y`. Both
//! streams get a residual connection and layer normalization; nodes also
//! pass through a ReLU feed-forward block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_backward, LayerNorm, LayerNormCache, Linear, Parameters};
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayer {
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub edge_mul: Linear,
    pub edge_add: Linear,
    pub node_out: Linear,
    pub edge_out: Linear,
    pub node_norm: LayerNorm,
    pub edge_norm: LayerNorm,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
    pub ffn_norm: LayerNorm,
}

pub struct AttentionCache {
    n: usize,
    h: Matrix,
    e: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    e1: Matrix,
    y: Matrix,
    attn: Matrix,
    o: Matrix,
    ln_node: LayerNormCache,
    h1: Matrix,
    ffa: Matrix,
    ffr: Matrix,
    ln_ffn: LayerNormCache,
    ln_edge: LayerNormCache,
}

impl AttentionCache {
    /// Attention weights, `n² × heads`; row `i·n + j` is the weight node `i`
    /// puts on node `j`.
    pub fn attention(&self) -> &Matrix {
        &self.attn
    }
}

impl AttentionLayer {
    pub fn new<R: Rng + ?Sized>(hidden: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || hidden % heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "{heads} heads do not divide hidden width {hidden}"
            )));
        }
        Ok(Self {
            heads,
            query: Linear::new(hidden, hidden, rng),
            key: Linear::new(hidden, hidden, rng),
            value: Linear::new(hidden, hidden, rng),
            edge_mul: Linear::new(hidden, hidden, rng),
            edge_add: Linear::new(hidden, hidden, rng),
            node_out: Linear::new(hidden, hidden, rng),
            edge_out: Linear::new(hidden, hidden, rng),
            node_norm: LayerNorm::new(hidden),
            edge_norm: LayerNorm::new(hidden),
            ffn_in: Linear::new(hidden, 2 * hidden, rng),
            ffn_out: Linear::new(2 * hidden, hidden, rng),
            ffn_norm: LayerNorm::new(hidden),
        })
    }

    pub fn hidden(&self) -> usize {
        self.query.input_width()
    }

    pub fn forward(&self, h: &Matrix, e: &Matrix) -> Result<(Matrix, Matrix, AttentionCache)> {
        let n = h.rows();
        let width = self.hidden();
        if h.cols() != width || e.cols() != width || e.rows() != n * n {
            return Err(Error::Shape(format!(
                "attention expects node states n×{width} and pair states n²×{width}, got {:?} and {:?}",
                h.shape(),
                e.shape()
            )));
        }
        let dh = width / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.query.forward(h);
        let k = self.key.forward(h);
        let v = self.value.forward(h);
        let e1 = self.edge_mul.forward(e);
        let e2 = self.edge_add.forward(e);

        let mut y = Matrix::zeros(n * n, width);
        let mut scores = Matrix::zeros(n * n, self.heads);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                for f in 0..width {
                    let val = q[(i, f)] * k[(j, f)] * scale * (1.0 + e1[(r, f)]) + e2[(r, f)];
                    y[(r, f)] = val;
                    scores[(r, f / dh)] += val;
                }
            }
        }
        let mut attn = Matrix::zeros(n * n, self.heads);
        for i in 0..n {
            for hd in 0..self.heads {
                let max = (0..n)
                    .map(|j| scores[(i * n + j, hd)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..n {
                    let w = (scores[(i * n + j, hd)] - max).exp();
                    attn[(i * n + j, hd)] = w;
                    total += w;
                }
                for j in 0..n {
                    attn[(i * n + j, hd)] /= total;
                }
            }
        }
        let mut o = Matrix::zeros(n, width);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                for f in 0..width {
                    o[(i, f)] += attn[(r, f / dh)] * v[(j, f)];
                }
            }
        }

        let mut node_mid = self.node_out.forward(&o);
        node_mid.add_assign(h);
        let (h1, ln_node) = self.node_norm.forward(&node_mid);
        let ffa = self.ffn_in.forward(&h1);
        let ffr = relu(&ffa);
        let mut mid2 = self.ffn_out.forward(&ffr);
        mid2.add_assign(&h1);
        let (h2, ln_ffn) = self.ffn_norm.forward(&mid2);

        let mut edge_mid = self.edge_out.forward(&y);
        edge_mid.add_assign(e);
        let (e_new, ln_edge) = self.edge_norm.forward(&edge_mid);

        Ok((
            h2,
            e_new,
            AttentionCache {
                n,
                h: h.clone(),
                e: e.clone(),
                q,
                k,
                v,
                e1,
                y,
                attn,
                o,
                ln_node,
                h1,
                ffa,
                ffr,
                ln_ffn,
                ln_edge,
            },
        ))
    }

    /// Accumulates parameter gradients into `grad`; returns input gradients
    /// `(d_nodes, d_pairs)`.
    pub fn backward(
        &self,
        c: &AttentionCache,
        d_nodes: &Matrix,
        d_pairs: &Matrix,
        grad: &mut AttentionLayer,
    ) -> (Matrix, Matrix) {
        let n = c.n;
        let width = self.hidden();
        let dh_w = width / self.heads;
        let scale = 1.0 / (dh_w as f64).sqrt();

        let d_mid2 = self.ffn_norm.backward(&c.ln_ffn, d_nodes, &mut grad.ffn_norm);
        let d_ffr = self.ffn_out.backward(&c.ffr, &d_mid2, &mut grad.ffn_out);
        let d_ffa = relu_backward(&c.ffa, &d_ffr);
        let mut d_h1 = self.ffn_in.backward(&c.h1, &d_ffa, &mut grad.ffn_in);
        d_h1.add_assign(&d_mid2);
        let d_mid = self.node_norm.backward(&c.ln_node, &d_h1, &mut grad.node_norm);
        let mut dh = d_mid.clone();
        let d_o = self.node_out.backward(&c.o, &d_mid, &mut grad.node_out);

        let d_emid = self.edge_norm.backward(&c.ln_edge, d_pairs, &mut grad.edge_norm);
        let mut de = d_emid.clone();
        let mut d_y = self.edge_out.backward(&c.y, &d_emid, &mut grad.edge_out);

        // o_if = Σ_j a_ij,h(f) · v_jf
        let mut d_attn = Matrix::zeros(n * n, self.heads);
        let mut d_v = Matrix::zeros(n, width);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                for f in 0..width {
                    let hd = f / dh_w;
                    d_attn[(r, hd)] += d_o[(i, f)] * c.v[(j, f)];
                    d_v[(j, f)] += c.attn[(r, hd)] * d_o[(i, f)];
                }
            }
        }
        // softmax over j
        for i in 0..n {
            for hd in 0..self.heads {
                let dot: f64 = (0..n)
                    .map(|j| c.attn[(i * n + j, hd)] * d_attn[(i * n + j, hd)])
                    .sum();
                for j in 0..n {
                    let r = i * n + j;
                    let ds = c.attn[(r, hd)] * (d_attn[(r, hd)] - dot);
                    for f in hd * dh_w..(hd + 1) * dh_w {
                        d_y[(r, f)] += ds;
                    }
                }
            }
        }
        // y = q·k·scale·(1 + e1) + e2
        let mut d_q = Matrix::zeros(n, width);
        let mut d_k = Matrix::zeros(n, width);
        let mut d_e1 = Matrix::zeros(n * n, width);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                for f in 0..width {
                    let g = d_y[(r, f)];
                    let qk = c.q[(i, f)] * c.k[(j, f)] * scale;
                    d_e1[(r, f)] = g * qk;
                    let dp = g * (1.0 + c.e1[(r, f)]) * scale;
                    d_q[(i, f)] += dp * c.k[(j, f)];
                    d_k[(j, f)] += dp * c.q[(i, f)];
                }
            }
        }
        dh.add_assign(&self.query.backward(&c.h, &d_q, &mut grad.query));
        dh.add_assign(&self.key.backward(&c.h, &d_k, &mut grad.key));
        dh.add_assign(&self.value.backward(&c.h, &d_v, &mut grad.value));
        de.add_assign(&self.edge_mul.backward(&c.e, &d_e1, &mut grad.edge_mul));
        de.add_assign(&self.edge_add.backward(&c.e, &d_y, &mut grad.edge_add));
        (dh, de)
    }
}

impl Parameters for AttentionLayer {
    fn params(&self) -> Vec<&Matrix> {
        let mut v = Vec::new();
        for l in [
            &self.query,
            &self.key,
            &self.value,
            &self.edge_mul,
            &self.edge_add,
            &self.node_out,
            &self.edge_out,
            &self.ffn_in,
            &self.ffn_out,
        ] {
            v.extend(l.params());
        }
        for ln in [&self.node_norm, &self.edge_norm, &self.ffn_norm] {
            v.extend(ln.params());
        }
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = Vec::new();
        for l in [
            &mut self.query,
            &mut self.key,
            &mut self.value,
            &mut self.edge_mul,
            &mut self.edge_add,
            &mut self.node_out,
            &mut self.edge_out,
            &mut self.ffn_in,
            &mut self.ffn_out,
        ] {
            v.extend(l.params_mut());
        }
        for ln in [&mut self.node_norm, &mut self.edge_norm, &mut self.ffn_norm] {
            v.extend(ln.params_mut());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{
        assert_gradients_close, numerical_input_grad, numerical_param_grad,
    };
    use crate::rng::seeded;
    use rand::seq::SliceRandom;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn permute_nodes(h: &Matrix, perm: &[usize]) -> Matrix {
        h.select_rows(perm)
    }

    fn permute_pairs(e: &Matrix, perm: &[usize]) -> Matrix {
        let n = perm.len();
        let rows: Vec<usize> = (0..n * n).map(|r| perm[r / n] * n + perm[r % n]).collect();
        e.select_rows(&rows)
    }

    #[test]
    fn head_count_must_divide_width() {
        let mut rng = seeded(0);
        assert!(AttentionLayer::new(6, 4, &mut rng).is_err());
        assert!(AttentionLayer::new(8, 4, &mut rng).is_ok());
    }

    #[test]
    fn single_node_attends_to_itself() {
        let mut rng = seeded(1);
        let layer = AttentionLayer::new(4, 2, &mut rng).unwrap();
        let (_, _, cache) = layer
            .forward(&random(1, 4, &mut rng), &random(1, 4, &mut rng))
            .unwrap();
        assert_eq!(cache.attention().data(), &[1.0, 1.0]);
    }

    #[test]
    fn identical_nodes_give_identical_rows() {
        let mut rng = seeded(2);
        let layer = AttentionLayer::new(4, 2, &mut rng).unwrap();
        let row = random(1, 4, &mut rng);
        let h = Matrix::from_rows(&vec![row.row(0).to_vec(); 3]);
        let pair = random(1, 4, &mut rng);
        let e = Matrix::from_rows(&vec![pair.row(0).to_vec(); 9]);
        let (out, _, _) = layer.forward(&h, &e).unwrap();
        for r in 1..3 {
            for c in 0..4 {
                assert!((out[(r, c)] - out[(0, c)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_dense_softmax_attention_oracle() {
        // Direct per-head computation for three nodes.
        let mut rng = seeded(3);
        let layer = AttentionLayer::new(4, 2, &mut rng).unwrap();
        let h = random(3, 4, &mut rng);
        let e = random(9, 4, &mut rng);
        let (_, _, cache) = layer.forward(&h, &e).unwrap();
        let q = layer.query.forward(&h);
        let k = layer.key.forward(&h);
        let e1 = layer.edge_mul.forward(&e);
        let e2 = layer.edge_add.forward(&e);
        let scale = 1.0 / 2f64.sqrt();
        for i in 0..3 {
            for hd in 0..2 {
                let s: Vec<f64> = (0..3)
                    .map(|j| {
                        (hd * 2..hd * 2 + 2)
                            .map(|f| q[(i, f)] * k[(j, f)] * scale * (1.0 + e1[(i * 3 + j, f)]) + e2[(i * 3 + j, f)])
                            .sum::<f64>()
                    })
                    .collect();
                let z: f64 = s.iter().map(|v| v.exp()).sum();
                for j in 0..3 {
                    let expect = s[j].exp() / z;
                    assert!((cache.attention()[(i * 3 + j, hd)] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = seeded(4);
        let layer = AttentionLayer::new(8, 4, &mut rng).unwrap();
        for _ in 0..5 {
            let n = 5;
            let h = random(n, 8, &mut rng);
            let e = random(n * n, 8, &mut rng);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let (h_out, e_out, _) = layer.forward(&h, &e).unwrap();
            let (hp_out, ep_out, _) = layer
                .forward(&permute_nodes(&h, &perm), &permute_pairs(&e, &perm))
                .unwrap();
            let expect_h = permute_nodes(&h_out, &perm);
            let expect_e = permute_pairs(&e_out, &perm);
            for (a, b) in hp_out.data().iter().zip(expect_h.data()) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in ep_out.data().iter().zip(expect_e.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = seeded(50 + seed);
            let layer = AttentionLayer::new(4, 2, &mut rng).unwrap();
            let n = 3;
            let h = random(n, 4, &mut rng);
            let e = random(n * n, 4, &mut rng);
            let ph = random(n, 4, &mut rng);
            let pe = random(n * n, 4, &mut rng);
            let loss = |l: &AttentionLayer, h: &Matrix, e: &Matrix| {
                let (a, b, _) = l.forward(h, e).unwrap();
                a.hadamard(&ph).sum() + b.hadamard(&pe).sum()
            };
            let (_, _, cache) = layer.forward(&h, &e).unwrap();
            let mut grad = layer.zeros_like();
            let (dh, de) = layer.backward(&cache, &ph, &pe, &mut grad);
            let numeric = numerical_param_grad(&layer, |l| loss(l, &h, &e));
            assert_gradients_close(&grad.flatten(), &numeric, 1e-4);
            assert_gradients_close(dh.data(), &numerical_input_grad(&h, |x| loss(&layer, x, &e)), 1e-4);
            assert_gradients_close(de.data(), &numerical_input_grad(&e, |x| loss(&layer, &h, x)), 1e-4);
        }
    }
}
