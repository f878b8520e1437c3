use ndarray::Array2;

use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking a logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `-ln p[true_label]`, with `p` clamped at [`PROBABILITY_FLOOR`].
pub fn cross_entropy(probabilities: &[f64], true_label: usize) -> Result<f64> {
    if true_label >= probabilities.len() {
        return Err(Error::validation(format!(
            "label index {true_label} out of range for {} classes",
            probabilities.len()
        )));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::validation(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(-probabilities[true_label].max(PROBABILITY_FLOOR).ln())
}

/// dL/dlogits of mean softmax cross-entropy over a batch: `(p - onehot) / batch`.
pub fn softmax_cross_entropy_delta(probs: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    if labels.len() != probs.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            probs.nrows()
        )));
    }
    let n = probs.nrows() as f64;
    let mut delta = probs.clone();
    for (mut row, &label) in delta.rows_mut().into_iter().zip(labels) {
        if label >= row.len() {
            return Err(Error::validation(format!("label index {label} out of range")));
        }
        row[label] -= 1.0;
        row.mapv_inplace(|v| v / n);
    }
    Ok(delta)
}
