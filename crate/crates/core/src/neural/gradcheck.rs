//! Central finite-difference checks for hand-written backward passes.

use super::{Matrix, Parameters};

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-6)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Numerical gradient of `loss` with respect to every parameter of `model`.
pub fn numerical_param_grad<P, F>(model: &P, mut loss: F) -> Vec<f64>
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let base = model.flatten();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + FD_STEP;
        probe.assign_flat(&flat);
        let up = loss(&probe);
        flat[i] = base[i] - FD_STEP;
        probe.assign_flat(&flat);
        let down = loss(&probe);
        flat[i] = base[i];
        out.push((up - down) / (2.0 * FD_STEP));
    }
    out
}

pub fn numerical_input_grad<F>(x: &Matrix, mut loss: F) -> Vec<f64>
where
    F: FnMut(&Matrix) -> f64,
{
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.data().len());
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let up = loss(&probe);
        probe.data_mut()[i] = orig - FD_STEP;
        let down = loss(&probe);
        probe.data_mut()[i] = orig;
        out.push((up - down) / (2.0 * FD_STEP));
    }
    out
}

pub fn assert_gradients_close(analytic: &[f64], numeric: &[f64], tol: f64) {
    let err = max_relative_error(analytic, numeric);
    assert!(err < tol, "max relative gradient error {err:e} exceeds {tol:e}");
}
