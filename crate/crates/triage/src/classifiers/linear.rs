//! Multinomial (softmax) logistic regression trained by full-batch
//! gradient descent. Deterministic: weights start at zero and no sampling
//! is involved.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

use super::softmax;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticParams {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

/// Mean cross-entropy with L2 penalty on the weights (not the biases), and
/// its analytic gradient. Exposed so the finite-difference check can probe
/// exactly what the trainer descends.
pub fn logistic_loss_and_grad(
    weights: &[Vec<f64>],
    biases: &[f64],
    xs: &[SparseVector],
    ys: &[usize],
    l2: f64,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let k = weights.len();
    let d = weights[0].len();
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![vec![0.0f64; d]; k];
    let mut grad_b = vec![0.0f64; k];

    for (x, &y) in xs.iter().zip(ys) {
        let logits: Vec<f64> = weights
            .iter()
            .zip(biases)
            .map(|(w, &b)| x.dot_dense(w) + b)
            .collect();
        let probs = softmax(&logits);
        loss -= probs[y].max(1e-300).ln();
        for c in 0..k {
            let delta = probs[c] - if c == y { 1.0 } else { 0.0 };
            for &(col, v) in x.entries() {
                grad_w[c][col] += delta * v;
            }
            grad_b[c] += delta;
        }
    }
    loss /= n;
    for row in &mut grad_w {
        for g in row.iter_mut() {
            *g /= n;
        }
    }
    for g in &mut grad_b {
        *g /= n;
    }

    let mut penalty = 0.0;
    for (c, row) in weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            penalty += w * w;
            grad_w[c][j] += l2 * w;
        }
    }
    loss += 0.5 * l2 * penalty;
    (loss, grad_w, grad_b)
}

pub(super) fn fit_logistic(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    l2: f64,
    iterations: usize,
    learning_rate: f64,
) -> LogisticParams {
    let d = features[0].dim();
    let mut weights = vec![vec![0.0f64; d]; n_classes];
    let mut biases = vec![0.0f64; n_classes];
    for _ in 0..iterations {
        let (_, grad_w, grad_b) = logistic_loss_and_grad(&weights, &biases, features, labels, l2);
        for (w_row, g_row) in weights.iter_mut().zip(&grad_w) {
            for (w, g) in w_row.iter_mut().zip(g_row) {
                *w -= learning_rate * g;
            }
        }
        for (b, g) in biases.iter_mut().zip(&grad_b) {
            *b -= learning_rate * g;
        }
    }
    LogisticParams { weights, biases }
}

impl LogisticParams {
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| x.dot_dense(w) + b)
            .collect();
        softmax(&logits)
    }
}
