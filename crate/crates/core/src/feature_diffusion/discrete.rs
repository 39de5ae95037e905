//! Discrete feature diffusion: every column is a categorical variable over
//! the type's alphabet, noised toward its own marginal and denoised by an
//! MLP over one-hot rows.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::FeatureDiffusionConfig;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::graph_diffusion::{cosine_schedule, empirical_marginal, CategoricalDiffusion, NoiseSchedule};
use crate::neural::{
    softmax_rows, timestep_embedding, AdamConfig, AdamState, InputStem, Matrix, MlpConfig, MlpDenoiser,
    Parameters,
};
use crate::rng::{sample_categorical, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFeatureModel {
    pub alphabet: Vec<i64>,
    pub width: usize,
    /// One marginal prior per column, over alphabet indices.
    pub priors: Vec<CategoricalDiffusion>,
    pub schedule: NoiseSchedule,
    pub network: MlpDenoiser,
    pub loss_history: Vec<f64>,
}

impl DiscreteFeatureModel {
    pub fn states(&self) -> usize {
        self.alphabet.len()
    }

    pub fn index_of(&self, value: i64) -> Option<usize> {
        self.alphabet.binary_search(&value).ok()
    }

    /// One-hot encode rows of alphabet indices into `rows × (d·k)`.
    pub fn one_hot(&self, rows: &[Vec<usize>]) -> Matrix {
        let k = self.states();
        let mut m = Matrix::zeros(rows.len(), self.width * k);
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m[(r, c * k + v)] = 1.0;
            }
        }
        m
    }

    fn time_matrix(&self, ts: &[usize]) -> Matrix {
        let w = self.network.config.time_width;
        let rows: Vec<Vec<f64>> = ts.iter().map(|&t| timestep_embedding(t as f64, w)).collect();
        if rows.is_empty() {
            Matrix::zeros(0, w)
        } else {
            Matrix::from_rows(&rows)
        }
    }

    /// Predicted clean distributions: `rows × (d·k)`, softmax within each
    /// column's block of `k`.
    pub fn predict_clean(&self, noisy: &[Vec<usize>], ts: &[usize]) -> Result<Matrix> {
        let (logits, _) = self.network.forward(&self.one_hot(noisy), &self.time_matrix(ts), None)?;
        Ok(block_softmax(&logits, self.width, self.states()))
    }
}

/// Softmax over each contiguous block of `k` columns.
pub fn block_softmax(logits: &Matrix, width: usize, k: usize) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for c in 0..width {
        let p = softmax_rows(&logits.columns(c * k, k));
        for r in 0..logits.rows() {
            out.row_mut(r)[c * k..(c + 1) * k].copy_from_slice(p.row(r));
        }
    }
    out
}

/// Mean over columns of per-column cross-entropy against clean indices,
/// averaged over rows; gradient with respect to the logits.
pub fn column_cross_entropy(logits: &Matrix, targets: &[Vec<usize>], width: usize, k: usize) -> (f64, Matrix) {
    let probs = block_softmax(logits, width, k);
    let rows = logits.rows().max(1) as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (r, row) in targets.iter().enumerate() {
        for (c, &t) in row.iter().enumerate() {
            loss -= probs[(r, c * k + t)].max(f64::MIN_POSITIVE).ln();
            grad[(r, c * k + t)] -= 1.0;
        }
    }
    let scale = 1.0 / (rows * width.max(1) as f64);
    grad.scale(scale);
    (loss * scale, grad)
}

/// Resample each column of `x0` (alphabet indices) from its row of `Q̄_t`.
pub fn forward_noise_features<R: Rng + ?Sized>(
    model: &DiscreteFeatureModel,
    x0: &[usize],
    t: usize,
    rng: &mut R,
) -> Vec<usize> {
    x0.iter()
        .zip(&model.priors)
        .map(|(&v, prior)| sample_categorical(rng, &prior.noisy_distribution(&model.schedule, t, v)))
        .collect()
}

fn encode_rows(rows: &FeatureMatrix, alphabet: &[i64]) -> Result<Vec<Vec<usize>>> {
    let n = rows.n_rows();
    (0..n)
        .map(|i| {
            let row = rows
                .discrete_row(i)
                .ok_or_else(|| Error::InvalidArgument("discrete diffusion needs discrete features".into()))?;
            row.iter()
                .map(|v| {
                    alphabet
                        .binary_search(v)
                        .map_err(|_| Error::InvalidArgument(format!("value {v} outside alphabet")))
                })
                .collect()
        })
        .collect()
}

/// Train a discrete feature denoiser on the rows of one generator.
pub fn train_discrete(rows: &FeatureMatrix, config: &FeatureDiffusionConfig, seed: u64) -> Result<DiscreteFeatureModel> {
    if rows.n_rows() == 0 {
        return Err(Error::Empty("no feature rows to train on".into()));
    }
    let alphabet = rows
        .alphabet()
        .ok_or_else(|| Error::InvalidArgument("discrete diffusion needs discrete features".into()))?
        .to_vec();
    let width = rows.width();
    let k = alphabet.len();
    let data = encode_rows(rows, &alphabet)?;
    let priors = (0..width)
        .map(|c| {
            let mut counts = vec![0.0; k];
            for row in &data {
                counts[row[c]] += 1.0;
            }
            CategoricalDiffusion::new(empirical_marginal(&counts))
        })
        .collect();
    let mut rng = seeded(seed);
    let network = MlpDenoiser::new(
        MlpConfig {
            input_width: width * k,
            output_width: width * k,
            hidden: config.hidden,
            blocks: config.blocks,
            dropout: config.dropout,
            time_width: config.time_width,
            stem: InputStem::Activated,
        },
        &mut rng,
    );
    let mut model = DiscreteFeatureModel {
        alphabet,
        width,
        priors,
        schedule: cosine_schedule(config.diffusion_steps),
        network,
        loss_history: Vec::with_capacity(config.train_steps),
    };
    let mut adam = AdamState::new(
        AdamConfig::with_lr(config.learning_rate, config.weight_decay),
        model.network.num_params(),
    );
    for _ in 0..config.train_steps {
        let mut clean = Vec::with_capacity(config.batch_size);
        let mut noisy = Vec::with_capacity(config.batch_size);
        let mut ts = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let row = &data[rng.random_range(0..data.len())];
            let t = rng.random_range(1..=config.diffusion_steps);
            noisy.push(forward_noise_features(&model, row, t, &mut rng));
            clean.push(row.clone());
            ts.push(t);
        }
        let x = model.one_hot(&noisy);
        let time = model.time_matrix(&ts);
        let dropout_rng: Option<&mut dyn RngCore> = if config.dropout > 0.0 { Some(&mut rng) } else { None };
        let (logits, cache) = model.network.forward(&x, &time, dropout_rng)?;
        let (loss, d_logits) = column_cross_entropy(&logits, &clean, width, k);
        let grad = model.network.backward(&cache, &d_logits);
        adam.step(&mut model.network, &grad);
        model.loss_history.push(loss);
    }
    Ok(model)
}

/// Reverse-diffuse `count` rows, starting from per-column marginal draws.
pub fn sample_discrete<R: RngCore + ?Sized>(
    model: &DiscreteFeatureModel,
    count: usize,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let k = model.states();
    let mut state: Vec<Vec<usize>> = (0..count)
        .map(|_| model.priors.iter().map(|p| sample_categorical(rng, &p.marginal)).collect())
        .collect();
    if count > 0 {
        for t in (1..=model.schedule.steps).rev() {
            let clean = model.predict_clean(&state, &vec![t; count])?;
            for (r, row) in state.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    let p_clean = &clean.row(r)[c * k..(c + 1) * k];
                    let p = model.priors[c].reverse_step(&model.schedule, t, *cell, p_clean);
                    *cell = sample_categorical(rng, &p);
                }
            }
        }
    }
    let rows = state
        .into_iter()
        .map(|row| row.into_iter().map(|i| model.alphabet[i]).collect())
        .collect();
    FeatureMatrix::discrete(model.alphabet.clone(), model.width, rows)
}

/// Monte-Carlo estimate of `E[log p_θ(x_0 | x_t)]` (summed over columns)
/// with `draws` noise samples per validation row and `t` uniform in `1..=T`.
pub fn reconstruction_loss<R: Rng + ?Sized>(
    model: &DiscreteFeatureModel,
    validation: &FeatureMatrix,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if validation.n_rows() == 0 || draws == 0 {
        return Err(Error::Empty("validation set is empty".into()));
    }
    let data = encode_rows(validation, &model.alphabet)?;
    let k = model.states();
    let mut noisy = Vec::with_capacity(data.len() * draws);
    let mut clean = Vec::with_capacity(data.len() * draws);
    let mut ts = Vec::with_capacity(data.len() * draws);
    for row in &data {
        for _ in 0..draws {
            let t = rng.random_range(1..=model.schedule.steps);
            noisy.push(forward_noise_features(model, row, t, rng));
            clean.push(row);
            ts.push(t);
        }
    }
    let probs = model.predict_clean(&noisy, &ts)?;
    let mut total = 0.0;
    for (r, row) in clean.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            total += probs[(r, c * k + v)].max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok(total / clean.len() as f64)
}
