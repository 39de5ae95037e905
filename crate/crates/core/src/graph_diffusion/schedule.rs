//! Cosine noise schedule, marginal transition matrices and the reverse-step
//! posterior shared by structure and feature diffusion.

use serde::{Deserialize, Serialize};

use crate::neural::Matrix;

const COSINE_OFFSET: f64 = 0.008;

/// Cumulative retention `ᾱ_t` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Per-step retention `α_t = ᾱ_t / ᾱ_{t-1}` (`α_0 = 1`).
    pub fn alpha(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            (self.alpha_bar[t] / self.alpha_bar[t - 1]).clamp(0.0, 1.0)
        }
    }
}

/// `ᾱ_t = f(t)/f(0)` with `f(t) = cos²((t/T + s)/(1 + s) · π/2)`, `s = 0.008`.
pub fn cosine_schedule(steps: usize) -> NoiseSchedule {
    assert!(steps >= 1, "schedule needs at least one step");
    let f = |t: usize| {
        let x = (t as f64 / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
        (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
    };
    let f0 = f(0);
    let alpha_bar = (0..=steps).map(|t| (f(t) / f0).clamp(0.0, 1.0)).collect();
    NoiseSchedule { steps, alpha_bar }
}

/// `Q = α·I + (1-α)·𝟙 mᵀ`: keep the state with probability `α`, otherwise
/// redraw it from the marginal `m`.
pub fn marginal_transition(alpha: f64, marginal: &[f64]) -> Matrix {
    let k = marginal.len();
    let mut q = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            q[(i, j)] = (1.0 - alpha) * marginal[j] + if i == j { alpha } else { 0.0 };
        }
    }
    q
}

/// Empirical marginal over `k` states with every observed count; falls back
/// to uniform when nothing was observed.
pub fn empirical_marginal(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / counts.len() as f64; counts.len()]
    }
}

/// Transition matrices for one categorical variable under a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDiffusion {
    pub marginal: Vec<f64>,
}

impl CategoricalDiffusion {
    pub fn new(marginal: Vec<f64>) -> Self {
        Self { marginal }
    }

    pub fn states(&self) -> usize {
        self.marginal.len()
    }

    pub fn step_matrix(&self, schedule: &NoiseSchedule, t: usize) -> Matrix {
        marginal_transition(schedule.alpha(t), &self.marginal)
    }

    /// `Q̄_t = Q_1 ⋯ Q_t`, which for marginal transitions collapses to the
    /// same form with `ᾱ_t`.
    pub fn cumulative_matrix(&self, schedule: &NoiseSchedule, t: usize) -> Matrix {
        marginal_transition(schedule.alpha_bar(t), &self.marginal)
    }

    /// Row of `Q̄_t` for clean state `x0`: the distribution of the noisy state.
    pub fn noisy_distribution(&self, schedule: &NoiseSchedule, t: usize, x0: usize) -> Vec<f64> {
        let ab = schedule.alpha_bar(t);
        self.marginal
            .iter()
            .enumerate()
            .map(|(j, &m)| (1.0 - ab) * m + if j == x0 { ab } else { 0.0 })
            .collect()
    }

    /// Reverse-step distribution `p(x_{t-1} | x_t)` obtained by weighting
    /// `q(x_{t-1} | x_t, x_0 = a)` with the predicted clean distribution.
    pub fn reverse_step(
        &self,
        schedule: &NoiseSchedule,
        t: usize,
        x_t: usize,
        clean: &[f64],
    ) -> Vec<f64> {
        let k = self.states();
        let alpha = schedule.alpha(t);
        let ab_prev = schedule.alpha_bar(t - 1);
        let ab = schedule.alpha_bar(t);
        let m = &self.marginal;
        // q(x_t | x_{t-1} = j): column x_t of Q_t
        let forward: Vec<f64> = (0..k)
            .map(|j| (1.0 - alpha) * m[x_t] + if j == x_t { alpha } else { 0.0 })
            .collect();
        let mut out = vec![0.0; k];
        for (a, &pa) in clean.iter().enumerate() {
            if pa <= 0.0 {
                continue;
            }
            let evidence = (1.0 - ab) * m[x_t] + if a == x_t { ab } else { 0.0 };
            if evidence <= 0.0 {
                continue;
            }
            for j in 0..k {
                let prior = (1.0 - ab_prev) * m[j] + if a == j { ab_prev } else { 0.0 };
                out[j] += pa * forward[j] * prior / evidence;
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            out.iter_mut().for_each(|v| *v /= total);
            out
        } else {
            clean.to_vec()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_endpoints_and_monotone() {
        for steps in [1usize, 10, 50, 100, 500] {
            let s = cosine_schedule(steps);
            assert!((s.alpha_bar(0) - 1.0).abs() < 1e-9);
            assert!(s.alpha_bar.windows(2).all(|w| w[1] < w[0]));
            if steps >= 50 {
                assert!(s.alpha_bar(steps) < 0.01);
            }
        }
    }

    #[test]
    fn transition_fixtures() {
        let m = [0.25, 0.75];
        assert_eq!(marginal_transition(1.0, &m), Matrix::identity(2));
        let zero = marginal_transition(0.0, &m);
        assert_eq!(zero.row(0), &m);
        assert_eq!(zero.row(1), &m);
        let half = marginal_transition(0.5, &m);
        assert_eq!(half, Matrix::from_rows(&[vec![0.625, 0.375], vec![0.125, 0.875]]));
    }

    #[test]
    fn cumulative_equals_product_of_steps() {
        let diff = CategoricalDiffusion::new(vec![0.2, 0.5, 0.3]);
        let s = cosine_schedule(20);
        let mut prod = Matrix::identity(3);
        for t in 1..=20 {
            prod = prod.matmul(&diff.step_matrix(&s, t));
            let closed = diff.cumulative_matrix(&s, t);
            for (a, b) in prod.data().iter().zip(closed.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Bayes' rule by brute force: joint over (x0, x_{t-1}, x_t).
    #[test]
    fn reverse_step_matches_bayes_oracle() {
        let diff = CategoricalDiffusion::new(vec![0.1, 0.6, 0.3]);
        let s = cosine_schedule(10);
        let clean = [0.5, 0.2, 0.3];
        for t in 1..=10 {
            let qt = diff.step_matrix(&s, t);
            let qprev = diff.cumulative_matrix(&s, t - 1);
            for x_t in 0..3 {
                let mut expect = [0.0; 3];
                for a in 0..3 {
                    // p(x_{t-1}=j | x_t, x0=a) ∝ q(x_{t-1}=j | a) q(x_t | j)
                    let w: Vec<f64> = (0..3).map(|j| qprev[(a, j)] * qt[(j, x_t)]).collect();
                    let z: f64 = w.iter().sum();
                    for j in 0..3 {
                        expect[j] += clean[a] * w[j] / z;
                    }
                }
                let got = diff.reverse_step(&s, t, x_t, &clean);
                for j in 0..3 {
                    assert!((got[j] - expect[j]).abs() < 1e-12, "t={t} x_t={x_t}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(alpha in 0.0f64..=1.0, raw in proptest::collection::vec(0.0f64..1.0, 1..6)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let m: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let q = marginal_transition(alpha, &m);
            for r in 0..m.len() {
                prop_assert!((q.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(q.row(r).iter().all(|&v| v >= 0.0));
            }
        }
    }
}
