//! Column selection for wide feature matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Highest empirical variance.
    VarianceThreshold,
    /// Most rows differing from the background value: the first alphabet
    /// value for discrete columns, zero for continuous ones.
    TopKFrequency,
}

fn column_scores(m: &FeatureMatrix, method: SelectionMethod) -> Vec<f64> {
    let rows = m.rows_f64();
    let n = rows.len().max(1) as f64;
    let background = m.alphabet().map_or(0.0, |a| a[0] as f64);
    (0..m.width())
        .map(|c| {
            let col = rows.iter().map(|r| r[c]);
            match method {
                SelectionMethod::VarianceThreshold => {
                    let mean = col.clone().sum::<f64>() / n;
                    col.map(|v| (v - mean).powi(2)).sum::<f64>() / n
                }
                SelectionMethod::TopKFrequency => col.filter(|&v| v != background).count() as f64,
            }
        })
        .collect()
}

/// Keep the `k` best-scoring columns in their original order; ties go to the
/// lower column index.
pub fn feature_select(m: &FeatureMatrix, method: SelectionMethod, k: usize) -> Result<(FeatureMatrix, Vec<usize>)> {
    if k == 0 || k > m.width() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {k} of {} columns",
            m.width()
        )));
    }
    let scores = column_scores(m, method);
    let mut order: Vec<usize> = (0..m.width()).collect();
    // stable sort keeps lower indices first among equal scores
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    Ok((m.select_columns(&kept), kept))
}
