use crate::error::{Error, Result};

use super::layers::softmax_rows;
use super::Matrix;

/// Mean cross-entropy over rows against one-hot `targets`; returns the loss
/// and its gradient with respect to `logits`.
pub fn cross_entropy(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    let mut classes = Vec::with_capacity(targets.rows());
    for r in 0..targets.rows() {
        let row = targets.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::InvalidArgument(format!("target row {r} is not one-hot")));
        }
        classes.push(row.iter().position(|&v| v == 1.0).unwrap());
    }
    Ok(cross_entropy_indices(logits, &classes))
}

/// Same as [`cross_entropy`] with class indices as targets.
pub fn cross_entropy_indices(logits: &Matrix, targets: &[usize]) -> (f64, Matrix) {
    assert_eq!(logits.rows(), targets.len());
    let rows = logits.rows().max(1) as f64;
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
        grad[(r, t)] -= 1.0;
    }
    grad.scale(1.0 / rows);
    (loss / rows, grad)
}

/// Mean squared error over all cells.
pub fn mse(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    assert_eq!(pred.shape(), target.shape());
    let n = pred.data().len().max(1) as f64;
    let mut grad = pred.clone();
    grad.add_scaled(target, -1.0);
    let loss = grad.data().iter().map(|d| d * d).sum::<f64>() / n;
    grad.scale(2.0 / n);
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{assert_gradients_close, numerical_input_grad};

    #[test]
    fn confident_logit_gives_zero_loss() {
        let logits = Matrix::from_rows(&[vec![1000.0, 0.0, 0.0]]);
        let (loss, _) = cross_entropy_indices(&logits, &[0]);
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Matrix::zeros(2, 5);
        let (loss, _) = cross_entropy_indices(&logits, &[0, 3]);
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_class_value() {
        // -log softmax([1,2,3])[2] = ln(1 + e^-1 + e^-2)
        let expected = (1.0 + (-1f64).exp() + (-2f64).exp()).ln();
        assert!((expected - 0.4076).abs() < 1e-4);
        let logits = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        let targets = Matrix::from_rows(&[vec![0.0, 0.0, 1.0]]);
        let (loss, grad) = cross_entropy(&logits, &targets).unwrap();
        assert!((loss - expected).abs() < 1e-12);
        let numeric = numerical_input_grad(&logits, |l| cross_entropy(l, &targets).unwrap().0);
        assert_gradients_close(grad.data(), &numeric, 1e-6);
    }

    #[test]
    fn rejects_non_one_hot() {
        let logits = Matrix::zeros(1, 2);
        let targets = Matrix::from_rows(&[vec![0.5, 0.5]]);
        assert!(cross_entropy(&logits, &targets).is_err());
    }
}
