//! Feature denoiser: `MLPOut(MLPBlock(…MLPBlock(MLPIn(x))))`.
//!
//! - `MLPIn  = Lin ∘ ReLU ∘ SiLU`
//! - `MLPBlock = Norm ∘ Lin ∘ Drop ∘ SiLU ∘ Lin ∘ Drop ∘ MLPIn' ∘ Norm`, where
//!   every block carries its own `MLPIn'` sublayer
//! - `MLPOut = Lin ∘ SiLU ∘ Lin`
//!
//! The input is the concatenation of the (one-hot or real) feature row and a
//! sinusoidal embedding of the diffusion step. `ReLU ∘ SiLU` on the raw input
//! suits non-negative one-hot rows only; real-valued rows use a plain linear
//! stem instead, since the ReLU would erase every negative coordinate.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::layers::{
    apply_mask, dropout_mask, relu, relu_backward, silu, silu_backward, LayerNorm,
    LayerNormCache, Linear, Parameters,
};
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputStem {
    /// `Lin ∘ ReLU ∘ SiLU`, for one-hot input.
    #[default]
    Activated,
    /// `Lin` only, for signed real input.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_width: usize,
    pub output_width: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub dropout: f64,
    pub time_width: usize,
    #[serde(default)]
    pub stem: InputStem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBlock {
    pub norm_in: LayerNorm,
    pub sub_in: Linear,
    pub lin_a: Linear,
    pub lin_b: Linear,
    pub norm_out: LayerNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDenoiser {
    pub config: MlpConfig,
    pub input: Linear,
    pub blocks: Vec<MlpBlock>,
    pub out_hidden: Linear,
    pub out: Linear,
}

struct BlockCache {
    ln_in: LayerNormCache,
    n1: Matrix,
    s1: Matrix,
    r1: Matrix,
    mask1: Option<Matrix>,
    d1: Matrix,
    e1: Matrix,
    mask2: Option<Matrix>,
    g1: Matrix,
    ln_out: LayerNormCache,
}

pub struct MlpCache {
    z0: Matrix,
    a0: Matrix,
    b0: Matrix,
    blocks: Vec<BlockCache>,
    last: Matrix,
    o1: Matrix,
    o2: Matrix,
}

impl MlpDenoiser {
    pub fn new<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Self {
        let h = config.hidden;
        let input = Linear::new(config.input_width + config.time_width, h, rng);
        let blocks = (0..config.blocks)
            .map(|_| MlpBlock {
                norm_in: LayerNorm::new(h),
                sub_in: Linear::new(h, h, rng),
                lin_a: Linear::new(h, h, rng),
                lin_b: Linear::new(h, h, rng),
                norm_out: LayerNorm::new(h),
            })
            .collect();
        Self {
            config,
            input,
            out_hidden: Linear::new(h, h, rng),
            out: Linear::new(h, config.output_width, rng),
            blocks,
        }
    }

    /// Forward pass. Dropout is active only when `rng` is supplied (training
    /// mode); without it the pass is deterministic.
    pub fn forward(
        &self,
        x: &Matrix,
        time: &Matrix,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(Matrix, MlpCache)> {
        if x.cols() != self.config.input_width
            || time.cols() != self.config.time_width
            || x.rows() != time.rows()
        {
            return Err(Error::Shape(format!(
                "denoiser expects {}+{} input columns, got {:?} and {:?}",
                self.config.input_width,
                self.config.time_width,
                x.shape(),
                time.shape()
            )));
        }
        let p = self.config.dropout;
        let z0 = Matrix::hstack(&[x, time]);
        let (a0, b0) = match self.config.stem {
            InputStem::Activated => {
                let a0 = silu(&z0);
                let b0 = relu(&a0);
                (a0, b0)
            }
            InputStem::Linear => (Matrix::zeros(0, 0), z0.clone()),
        };
        let mut h = self.input.forward(&b0);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (n1, ln_in) = block.norm_in.forward(&h);
            let s1 = silu(&n1);
            let r1 = relu(&s1);
            let c1 = block.sub_in.forward(&r1);
            let mask1 = dropout_mask(c1.rows(), c1.cols(), p, rng.as_deref_mut());
            let d1 = apply_mask(&c1, &mask1);
            let e1 = block.lin_a.forward(&d1);
            let f1 = silu(&e1);
            let mask2 = dropout_mask(f1.rows(), f1.cols(), p, rng.as_deref_mut());
            let g1 = apply_mask(&f1, &mask2);
            let k1 = block.lin_b.forward(&g1);
            let (out, ln_out) = block.norm_out.forward(&k1);
            caches.push(BlockCache {
                ln_in,
                n1,
                s1,
                r1,
                mask1,
                d1,
                e1,
                mask2,
                g1,
                ln_out,
            });
            h = out;
        }
        let o1 = self.out_hidden.forward(&h);
        let o2 = silu(&o1);
        let logits = self.out.forward(&o2);
        Ok((
            logits,
            MlpCache {
                z0,
                a0,
                b0,
                blocks: caches,
                last: h,
                o1,
                o2,
            },
        ))
    }

    /// Parameter gradients for upstream gradient `d_out` (same shape as the output).
    pub fn backward(&self, cache: &MlpCache, d_out: &Matrix) -> MlpDenoiser {
        self.backward_with_input(cache, d_out).0
    }

    /// Parameter gradients plus the gradient with respect to the feature input.
    pub fn backward_with_input(&self, cache: &MlpCache, d_out: &Matrix) -> (MlpDenoiser, Matrix) {
        let mut grad = self.zeros_like();
        let d_o2 = self.out.backward(&cache.o2, d_out, &mut grad.out);
        let d_o1 = silu_backward(&cache.o1, &d_o2);
        let mut dh = self
            .out_hidden
            .backward(&cache.last, &d_o1, &mut grad.out_hidden);
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let c = &cache.blocks[i];
            let g = &mut grad.blocks[i];
            let d_k1 = block.norm_out.backward(&c.ln_out, &dh, &mut g.norm_out);
            let d_g1 = block.lin_b.backward(&c.g1, &d_k1, &mut g.lin_b);
            let d_f1 = apply_mask(&d_g1, &c.mask2);
            let d_e1 = silu_backward(&c.e1, &d_f1);
            let d_d1 = block.lin_a.backward(&c.d1, &d_e1, &mut g.lin_a);
            let d_c1 = apply_mask(&d_d1, &c.mask1);
            let d_r1 = block.sub_in.backward(&c.r1, &d_c1, &mut g.sub_in);
            let d_s1 = relu_backward(&c.s1, &d_r1);
            let d_n1 = silu_backward(&c.n1, &d_s1);
            dh = block.norm_in.backward(&c.ln_in, &d_n1, &mut g.norm_in);
        }
        let d_b0 = self.input.backward(&cache.b0, &dh, &mut grad.input);
        let d_z0 = match self.config.stem {
            InputStem::Activated => silu_backward(&cache.z0, &relu_backward(&cache.a0, &d_b0)),
            InputStem::Linear => d_b0,
        };
        let dx = d_z0.columns(0, self.config.input_width);
        (grad, dx)
    }
}

impl Parameters for MlpBlock {
    fn params(&self) -> Vec<&Matrix> {
        let mut v = self.norm_in.params();
        v.extend(self.sub_in.params());
        v.extend(self.lin_a.params());
        v.extend(self.lin_b.params());
        v.extend(self.norm_out.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.norm_in.params_mut();
        v.extend(self.sub_in.params_mut());
        v.extend(self.lin_a.params_mut());
        v.extend(self.lin_b.params_mut());
        v.extend(self.norm_out.params_mut());
        v
    }
}

impl Parameters for MlpDenoiser {
    fn params(&self) -> Vec<&Matrix> {
        let mut v = self.input.params();
        for b in &self.blocks {
            v.extend(b.params());
        }
        v.extend(self.out_hidden.params());
        v.extend(self.out.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.input.params_mut();
        for b in &mut self.blocks {
            v.extend(b.params_mut());
        }
        v.extend(self.out_hidden.params_mut());
        v.extend(self.out.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{assert_gradients_close, numerical_param_grad};
    use crate::neural::layers::softmax_rows;
    use crate::rng::seeded;

    fn config() -> MlpConfig {
        MlpConfig {
            input_width: 5,
            output_width: 4,
            hidden: 6,
            blocks: 2,
            dropout: 0.0,
            time_width: 4,
            stem: InputStem::Activated,
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect())
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let mut rng = seeded(0);
        let mut net = MlpDenoiser::new(config(), &mut rng);
        net.params_mut().into_iter().for_each(|m| m.fill(0.0));
        let x = random_matrix(3, 5, &mut rng);
        let t = random_matrix(3, 4, &mut rng);
        let (out, _) = net.forward(&x, &t, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = seeded(0);
        let net = MlpDenoiser::new(config(), &mut rng);
        assert!(net.forward(&Matrix::zeros(2, 4), &Matrix::zeros(2, 4), None).is_err());
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut rng = seeded(4);
        let mut cfg = config();
        cfg.dropout = 0.3;
        let net = MlpDenoiser::new(cfg, &mut rng);
        let x = random_matrix(3, 5, &mut rng);
        let t = random_matrix(3, 4, &mut rng);
        let a = net.forward(&x, &t, None).unwrap().0;
        let b = net.forward(&x, &t, None).unwrap().0;
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = seeded(100 + seed);
            let net = MlpDenoiser::new(config(), &mut rng);
            let x = random_matrix(2, 5, &mut rng);
            let t = random_matrix(2, 4, &mut rng);
            let probe = random_matrix(2, 4, &mut rng);
            let loss = |m: &MlpDenoiser| m.forward(&x, &t, None).unwrap().0.hadamard(&probe).sum();
            let (_, cache) = net.forward(&x, &t, None).unwrap();
            let grad = net.backward(&cache, &probe);
            assert_gradients_close(&grad.flatten(), &numerical_param_grad(&net, loss), 1e-4);
        }
    }

    #[test]
    fn linear_stem_gradients_match_finite_differences() {
        let mut cfg = config();
        cfg.stem = InputStem::Linear;
        let mut rng = seeded(21);
        let net = MlpDenoiser::new(cfg, &mut rng);
        let x = random_matrix(3, 5, &mut rng);
        let t = random_matrix(3, 4, &mut rng);
        let probe = random_matrix(3, 4, &mut rng);
        let loss = |m: &MlpDenoiser| m.forward(&x, &t, None).unwrap().0.hadamard(&probe).sum();
        let (_, cache) = net.forward(&x, &t, None).unwrap();
        let grad = net.backward(&cache, &probe);
        assert_gradients_close(&grad.flatten(), &numerical_param_grad(&net, loss), 1e-4);
        // a negative input must still reach the output
        let mut flipped = x.clone();
        flipped[(0, 0)] = -3.0;
        let mut lower = x.clone();
        lower[(0, 0)] = -6.0;
        assert_ne!(net.forward(&flipped, &t, None).unwrap().0.row(0), net.forward(&lower, &t, None).unwrap().0.row(0));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let mut rng = seeded(9);
        let net = MlpDenoiser::new(config(), &mut rng);
        let x = random_matrix(2, 5, &mut rng);
        let t = random_matrix(2, 4, &mut rng);
        let (_, cache) = net.forward(&x, &t, None).unwrap();
        let grad = net.backward(&cache, &Matrix::zeros(2, 4));
        assert!(grad.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dropout_gradients_use_the_same_mask() {
        let mut cfg = config();
        cfg.dropout = 0.4;
        let mut rng = seeded(11);
        let net = MlpDenoiser::new(cfg, &mut rng);
        let x = random_matrix(2, 5, &mut rng);
        let t = random_matrix(2, 4, &mut rng);
        let probe = random_matrix(2, 4, &mut rng);
        // Replaying the same rng seed reproduces the masks inside the loss.
        let loss = |m: &MlpDenoiser| {
            let mut r = seeded(77);
            m.forward(&x, &t, Some(&mut r)).unwrap().0.hadamard(&probe).sum()
        };
        let mut r = seeded(77);
        let (_, cache) = net.forward(&x, &t, Some(&mut r)).unwrap();
        let grad = net.backward(&cache, &probe);
        assert_gradients_close(&grad.flatten(), &numerical_param_grad(&net, loss), 1e-4);
    }

    #[test]
    fn two_layer_oracle() {
        // zero blocks: logits = Lin2(SiLU(Lin1(ReLU(SiLU(Lin0([x,t]))))))
        let cfg = MlpConfig {
            input_width: 2,
            output_width: 2,
            hidden: 2,
            blocks: 0,
            dropout: 0.0,
            time_width: 0,
            stem: InputStem::Activated,
        };
        let mut rng = seeded(5);
        let net = MlpDenoiser::new(cfg, &mut rng);
        let x = Matrix::from_rows(&[vec![0.3, -0.7]]);
        let (out, _) = net.forward(&x, &Matrix::zeros(1, 0), None).unwrap();

        let silu1 = |v: f64| v / (1.0 + (-v).exp());
        let lin = |l: &Linear, v: &[f64]| -> Vec<f64> {
            (0..l.output_width())
                .map(|j| l.bias[(0, j)] + (0..v.len()).map(|i| v[i] * l.weight[(i, j)]).sum::<f64>())
                .collect()
        };
        let z: Vec<f64> = x.row(0).iter().map(|&v| silu1(v).max(0.0)).collect();
        let h = lin(&net.input, &z);
        let o1: Vec<f64> = lin(&net.out_hidden, &h).into_iter().map(silu1).collect();
        let expect = lin(&net.out, &o1);
        for j in 0..2 {
            assert!((out[(0, j)] - expect[j]).abs() < 1e-12);
        }
        let p = softmax_rows(&out);
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
