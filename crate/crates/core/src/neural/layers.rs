use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Anything that owns trainable matrices. Gradients are carried in a value
/// of the same type (`zeros_like`), so optimizers and gradient checks can
/// walk parameters and gradients in lockstep.
pub trait Parameters {
    fn params(&self) -> Vec<&Matrix>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|m| m.data().len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for m in self.params() {
            out.extend_from_slice(m.data());
        }
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for m in self.params_mut() {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.params_mut().into_iter().for_each(|m| m.fill(0.0));
        z
    }

    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            a.add_assign(b);
        }
    }

    fn scale_params(&mut self, s: f64) {
        self.params_mut().into_iter().for_each(|m| m.scale(s));
    }
}

/// Affine map `y = x W + b` with `W: in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let mut weight = Matrix::zeros(input, output);
        weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
        let mut bias = Matrix::zeros(1, output);
        bias.data_mut()
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-bound..bound));
        Self { weight, bias }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: Matrix::zeros(1, output),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.weight);
        y.add_row_broadcast(&self.bias);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, grad: &mut Linear) -> Matrix {
        grad.weight.add_assign(&x.t_matmul(dy));
        grad.bias.add_assign(&dy.col_sums());
        dy.matmul_t(&self.weight)
    }
}

impl Parameters for Linear {
    fn params(&self) -> Vec<&Matrix> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }
}

const LN_EPS: f64 = 1e-5;

/// Layer normalization over the feature axis with learned gain and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Matrix,
    pub beta: Matrix,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Matrix::filled(1, width, 1.0),
            beta: Matrix::zeros(1, width),
        }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, LayerNormCache) {
        let (rows, d) = x.shape();
        let mut xhat = Matrix::zeros(rows, d);
        let mut inv_std = Vec::with_capacity(rows);
        let mut y = Matrix::zeros(rows, d);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..d {
                let h = (row[c] - mean) * is;
                xhat[(r, c)] = h;
                y[(r, c)] = h * self.gamma.data()[c] + self.beta.data()[c];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Matrix, grad: &mut LayerNorm) -> Matrix {
        let (rows, d) = dy.shape();
        let mut dx = Matrix::zeros(rows, d);
        let gamma = self.gamma.data();
        for r in 0..rows {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for c in 0..d {
                grad.gamma.data_mut()[c] += dyr[c] * xh[c];
                grad.beta.data_mut()[c] += dyr[c];
                let g = dyr[c] * gamma[c];
                sum_dxhat += g;
                sum_dxhat_xhat += g * xh[c];
            }
            let scale = cache.inv_std[r] / d as f64;
            for c in 0..d {
                let g = dyr[c] * gamma[c];
                dx[(r, c)] = scale * (d as f64 * g - sum_dxhat - xh[c] * sum_dxhat_xhat);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn params(&self) -> Vec<&Matrix> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn silu(x: &Matrix) -> Matrix {
    x.map(|v| v * sigmoid(v))
}

pub fn silu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        let s = sigmoid(v);
        *g *= s * (1.0 + v * (1.0 - s));
    }
    dx
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    dx
}

/// Inverted-dropout mask (entries 0 or `1/(1-p)`), or `None` when inactive.
pub fn dropout_mask<R: RngCore + ?Sized>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: Option<&mut R>,
) -> Option<Matrix> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    let mut m = Matrix::zeros(rows, cols);
    m.data_mut()
        .iter_mut()
        .for_each(|v| *v = if rng.random::<f64>() < p { 0.0 } else { keep });
    Some(m)
}

pub fn apply_mask(x: &Matrix, mask: &Option<Matrix>) -> Matrix {
    match mask {
        Some(m) => x.hadamard(m),
        None => x.clone(),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Sinusoidal embedding of a (possibly fractional) diffusion step: half
/// cosines, half sines over geometrically spaced frequencies.
pub fn timestep_embedding(t: f64, width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut out = vec![0.0; width];
    for i in 0..half {
        let freq = (-(10_000f64).ln() * i as f64 / half as f64).exp();
        out[i] = (t * freq).cos();
        out[half + i] = (t * freq).sin();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{assert_gradients_close, numerical_input_grad};
    use crate::rng::seeded;

    #[test]
    fn identity_linear_passes_input() {
        let mut lin = Linear::zeros(3, 3);
        lin.weight = Matrix::identity(3);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]);
        assert_eq!(lin.forward(&x), x);
    }

    #[test]
    fn linear_weight_gradient_is_xt_g() {
        let mut rng = seeded(1);
        let lin = Linear::new(3, 2, &mut rng);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 0.5]]);
        let g = Matrix::from_rows(&[vec![0.1, -0.2], vec![0.3, 0.4]]);
        let mut grad = lin.zeros_like();
        lin.backward(&x, &g, &mut grad);
        assert_eq!(grad.weight, x.t_matmul(&g));
        assert_eq!(grad.bias.data(), &[0.4, 0.2]);
    }

    #[test]
    fn layer_norm_and_activation_gradients() {
        let mut rng = seeded(2);
        let mut ln = LayerNorm::new(4);
        ln.gamma = Matrix::from_rows(&[vec![0.5, 1.5, -1.0, 2.0]]);
        ln.beta = Matrix::from_rows(&[vec![0.1, 0.0, -0.3, 0.2]]);
        let x = Matrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-2.0..2.0)).collect());
        let probe = Matrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect());
        let loss = |x: &Matrix| ln.forward(x).0.hadamard(&probe).sum();
        let (_, cache) = ln.forward(&x);
        let mut grad = ln.zeros_like();
        let dx = ln.backward(&cache, &probe, &mut grad);
        assert_gradients_close(dx.data(), &numerical_input_grad(&x, loss), 1e-6);

        let silu_loss = |x: &Matrix| silu(x).hadamard(&probe).sum();
        let dx = silu_backward(&x, &probe);
        assert_gradients_close(dx.data(), &numerical_input_grad(&x, silu_loss), 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let s = softmax_rows(&Matrix::from_rows(&[vec![1000.0, 0.0, -5.0], vec![1.0, 2.0, 3.0]]));
        for r in 0..2 {
            assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_inactive_without_rng() {
        assert!(dropout_mask::<crate::rng::Rng64>(2, 2, 0.5, None).is_none());
        let mut rng = seeded(3);
        assert!(dropout_mask(2, 2, 0.0, Some(&mut rng)).is_none());
        let m = dropout_mask(50, 50, 0.5, Some(&mut rng)).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
