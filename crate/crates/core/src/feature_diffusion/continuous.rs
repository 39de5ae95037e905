//! Gaussian diffusion over standardized real-valued feature rows
//! (ε-prediction, MSE loss), plus thresholding back onto a discrete alphabet.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ContinuousDiffusionConfig;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::neural::{mse, timestep_embedding, AdamConfig, AdamState, InputStem, Matrix, MlpConfig, MlpDenoiser, Parameters};
use crate::rng::seeded;

/// Floor applied to per-column standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

/// Linear β schedule with the endpoints of the 1000-step reference schedule
/// rescaled to `steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSchedule {
    pub betas: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

impl GaussianSchedule {
    pub fn linear(steps: usize) -> Self {
        let scale = 1000.0 / steps as f64;
        let (lo, hi) = (1e-4 * scale, (0.02 * scale).min(0.999));
        let mut betas = vec![0.0];
        let mut alpha_bar = vec![1.0];
        for t in 1..=steps {
            let frac = if steps == 1 { 1.0 } else { (t - 1) as f64 / (steps - 1) as f64 };
            let b = lo + (hi - lo) * frac;
            betas.push(b);
            alpha_bar.push(alpha_bar[t - 1] * (1.0 - b));
        }
        Self { betas, alpha_bar }
    }

    pub fn steps(&self) -> usize {
        self.betas.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousFeatureModel {
    pub width: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Per-column range of the standardized training data; predicted clean
    /// values are clipped to it during sampling.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub schedule: GaussianSchedule,
    pub network: MlpDenoiser,
    pub loss_history: Vec<f64>,
}

impl ContinuousFeatureModel {
    fn time_matrix(&self, ts: &[usize]) -> Matrix {
        let w = self.network.config.time_width;
        let mut m = Matrix::zeros(ts.len(), w);
        for (r, &t) in ts.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&timestep_embedding(t as f64, w));
        }
        m
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn train_continuous(rows: &FeatureMatrix, config: &ContinuousDiffusionConfig, seed: u64) -> Result<ContinuousFeatureModel> {
    let n = rows.n_rows();
    if n == 0 {
        return Err(Error::Empty("no feature rows to train on".into()));
    }
    let width = rows.width();
    let raw = rows.rows_f64();
    let mean: Vec<f64> = (0..width).map(|c| raw.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let std: Vec<f64> = (0..width)
        .map(|c| {
            let var = raw.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n as f64;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    let data: Vec<f64> = raw
        .iter()
        .flat_map(|r| (0..width).map(|c| (r[c] - mean[c]) / std[c]).collect::<Vec<_>>())
        .collect();
    let data = Matrix::from_vec(n, width, data);
    let lower = (0..width).map(|c| (0..n).map(|r| data[(r, c)]).fold(f64::INFINITY, f64::min)).collect();
    let upper = (0..width).map(|c| (0..n).map(|r| data[(r, c)]).fold(f64::NEG_INFINITY, f64::max)).collect();

    let mut rng = seeded(seed);
    let network = MlpDenoiser::new(
        MlpConfig {
            input_width: width,
            output_width: width,
            hidden: config.hidden,
            blocks: config.blocks,
            dropout: config.dropout,
            time_width: config.time_width,
            stem: InputStem::Linear,
        },
        &mut rng,
    );
    let mut model = ContinuousFeatureModel {
        width,
        mean,
        std,
        lower,
        upper,
        schedule: GaussianSchedule::linear(config.diffusion_steps),
        network,
        loss_history: Vec::with_capacity(config.train_steps),
    };
    let mut adam = AdamState::new(
        AdamConfig::with_lr(config.learning_rate, config.weight_decay),
        model.network.num_params(),
    );
    let b = config.batch_size;
    for _ in 0..config.train_steps {
        let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
        let ts: Vec<usize> = (0..b).map(|_| rng.random_range(1..=config.diffusion_steps)).collect();
        let x0 = data.select_rows(&idx);
        let eps = gaussian_matrix(b, width, &mut rng);
        let mut xt = Matrix::zeros(b, width);
        for r in 0..b {
            let ab = model.schedule.alpha_bar[ts[r]];
            for c in 0..width {
                xt[(r, c)] = ab.sqrt() * x0[(r, c)] + (1.0 - ab).sqrt() * eps[(r, c)];
            }
        }
        let dropout_rng: Option<&mut dyn RngCore> = if config.dropout > 0.0 { Some(&mut rng) } else { None };
        let (pred, cache) = model.network.forward(&xt, &model.time_matrix(&ts), dropout_rng)?;
        let (loss, d) = mse(&pred, &eps);
        let grad = model.network.backward(&cache, &d);
        adam.step(&mut model.network, &grad);
        model.loss_history.push(loss);
    }
    Ok(model)
}

/// Ancestral sampling with posterior variance; the predicted clean row is
/// clipped to the training range before each posterior step.
pub fn sample_continuous<R: RngCore + ?Sized>(
    model: &ContinuousFeatureModel,
    count: usize,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let predict = |x: &Matrix, t: usize| -> Result<Matrix> {
        Ok(model.network.forward(x, &model.time_matrix(&vec![t; x.rows()]), None)?.0)
    };
    let x = reverse_diffuse(&model.schedule, &model.lower, &model.upper, count, predict, rng)?;
    let d = model.width;
    let rows = (0..count)
        .map(|r| (0..d).map(|c| x[(r, c)] * model.std[c] + model.mean[c]).collect())
        .collect();
    FeatureMatrix::continuous(d, rows)
}

/// Standardized-space reverse process driven by an ε-predictor.
fn reverse_diffuse<R, F>(
    s: &GaussianSchedule,
    lower: &[f64],
    upper: &[f64],
    count: usize,
    predict: F,
    rng: &mut R,
) -> Result<Matrix>
where
    R: RngCore + ?Sized,
    F: Fn(&Matrix, usize) -> Result<Matrix>,
{
    let d = lower.len();
    let mut x = gaussian_matrix(count, d, rng);
    if count == 0 {
        return Ok(x);
    }
    for t in (1..=s.steps()).rev() {
        let eps = predict(&x, t)?;
        let (ab, ab_prev, beta) = (s.alpha_bar[t], s.alpha_bar[t - 1], s.betas[t]);
        let coef_x0 = ab_prev.sqrt() * beta / (1.0 - ab);
        let coef_xt = (1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        let var = beta * (1.0 - ab_prev) / (1.0 - ab);
        let noise = gaussian_matrix(count, d, rng);
        for r in 0..count {
            for c in 0..d {
                let x0 = ((x[(r, c)] - (1.0 - ab).sqrt() * eps[(r, c)]) / ab.sqrt()).clamp(lower[c], upper[c]);
                let mean = coef_x0 * x0 + coef_xt * x[(r, c)];
                x[(r, c)] = if t > 1 { mean + var.sqrt() * noise[(r, c)] } else { mean };
            }
        }
    }
    Ok(x)
}

/// Map real cells onto `alphabet`: for two-value alphabets, values at or
/// above `threshold` take the second value; wider alphabets clamp and round
/// to the nearest value (ties to the lower one).
pub fn discretize(rows: &FeatureMatrix, alphabet: &[i64], threshold: f64) -> Result<FeatureMatrix> {
    if alphabet.is_empty() {
        return Err(Error::InvalidArgument("alphabet is empty".into()));
    }
    let mut sorted = alphabet.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let map = |v: f64| -> i64 {
        if sorted.len() == 2 {
            return if v >= threshold { sorted[1] } else { sorted[0] };
        }
        let v = v.clamp(sorted[0] as f64, sorted[sorted.len() - 1] as f64);
        let mut best = sorted[0];
        for &a in &sorted {
            if (a as f64 - v).abs() < (best as f64 - v).abs() {
                best = a;
            }
        }
        best
    };
    let out = rows
        .rows_f64()
        .into_iter()
        .map(|r| r.into_iter().map(map).collect())
        .collect();
    FeatureMatrix::discrete(sorted, rows.width(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(steps: usize) -> ContinuousDiffusionConfig {
        ContinuousDiffusionConfig {
            diffusion_steps: 100,
            hidden: 32,
            blocks: 1,
            time_width: 16,
            batch_size: 64,
            learning_rate: 2e-3,
            train_steps: steps,
            ..Default::default()
        }
    }

    #[test]
    fn schedule_shape() {
        let s = GaussianSchedule::linear(1000);
        assert_eq!(s.steps(), 1000);
        assert!((s.betas[1] - 1e-4).abs() < 1e-15);
        assert!((s.betas[1000] - 0.02).abs() < 1e-15);
        assert!(s.alpha_bar[1000] < 1e-4);
        assert!(GaussianSchedule::linear(100).alpha_bar[100] < 1e-4);
    }

    #[test]
    fn discretize_rules() {
        let m = FeatureMatrix::continuous(2, vec![vec![0.7, -0.3]]).unwrap();
        let d = discretize(&m, &[0, 1], 0.5).unwrap();
        assert_eq!(d.discrete_row(0).unwrap(), &[1, 0]);
        let m = FeatureMatrix::continuous(3, vec![vec![3.4, 9.0, -2.0]]).unwrap();
        let d = discretize(&m, &[0, 1, 2, 3, 4, 5], 0.5).unwrap();
        assert_eq!(d.discrete_row(0).unwrap(), &[3, 5, 0]);
        assert!(discretize(&m, &[], 0.5).is_err());
    }

    fn moments(x: &Matrix, c: usize) -> (f64, f64) {
        let n = x.rows() as f64;
        let mean = (0..x.rows()).map(|r| x[(r, c)]).sum::<f64>() / n;
        let var = (0..x.rows()).map(|r| (x[(r, c)] - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn exact_predictor_recovers_standard_normal() {
        // for x_0 ~ N(0, 1), E[ε | x_t] = sqrt(1 - ᾱ_t) x_t
        let s = GaussianSchedule::linear(100);
        let predict = |x: &Matrix, t: usize| -> Result<Matrix> {
            let mut e = x.clone();
            e.scale((1.0 - s.alpha_bar[t]).sqrt());
            Ok(e)
        };
        let x = reverse_diffuse(&s, &[-1e9], &[1e9], 4000, predict, &mut seeded(5)).unwrap();
        let (mean, std) = moments(&x, 0);
        assert!(mean.abs() < 0.06, "mean {mean}");
        assert!((std - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = seeded(1);
        let rows = (0..1000).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let data = FeatureMatrix::continuous(2, rows).unwrap();
        let model = train_continuous(&data, &config(1500), 2).unwrap();
        let s = sample_continuous(&model, 1000, &mut seeded(3)).unwrap();
        for c in 0..2 {
            let col: Vec<f64> = (0..1000).map(|i| s.continuous_row(i).unwrap()[c]).collect();
            let mean = col.iter().sum::<f64>() / 1000.0;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1000.0).sqrt();
            assert!(mean.abs() <= 0.2, "mean {mean}");
            assert!((0.8..=1.2).contains(&std), "std {std}");
        }
    }

    #[test]
    fn constant_column_stays_constant() {
        let data = FeatureMatrix::continuous(2, (0..20).map(|i| vec![4.0, i as f64]).collect()).unwrap();
        let model = train_continuous(&data, &config(20), 0).unwrap();
        let s = sample_continuous(&model, 50, &mut seeded(1)).unwrap();
        for i in 0..50 {
            assert!((s.continuous_row(i).unwrap()[0] - 4.0).abs() <= 3.0 * STD_FLOOR);
        }
        assert_eq!(sample_continuous(&model, 0, &mut seeded(1)).unwrap().n_rows(), 0);
        assert_eq!(s, sample_continuous(&model, 50, &mut seeded(1)).unwrap());
    }

    #[test]
    fn empty_rows_error() {
        let data = FeatureMatrix::continuous(2, vec![]).unwrap();
        assert!(matches!(train_continuous(&data, &config(1), 0), Err(Error::Empty(_))));
    }
}
