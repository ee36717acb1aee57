//! Multinomial and Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

use super::{argmax_tie_low, densify, normalize_log_scores};

/// Laplace-smoothed multinomial naive Bayes over non-negative feature
/// weights (raw counts or TF-IDF).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultinomialNbParams {
    class_log_prior: Vec<f64>,
    /// per class, per feature: ln P(feature | class)
    feature_log_prob: Vec<Vec<f64>>,
}

pub(super) fn fit_multinomial(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    alpha: f64,
) -> Result<MultinomialNbParams> {
    let d = features[0].dim();
    let n = features.len() as f64;
    let mut class_counts = vec![0.0f64; n_classes];
    let mut sums = vec![vec![0.0f64; d]; n_classes];
    for (x, &y) in features.iter().zip(labels) {
        class_counts[y] += 1.0;
        for &(col, v) in x.entries() {
            if v < 0.0 {
                return Err(Error::invalid(
                    "multinomial naive Bayes requires non-negative features",
                ));
            }
            sums[y][col] += v;
        }
    }
    let class_log_prior = class_counts.iter().map(|&c| (c / n).ln()).collect();
    let feature_log_prob = sums
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + alpha * d as f64;
            row.iter().map(|&s| ((s + alpha) / total).ln()).collect()
        })
        .collect();
    Ok(MultinomialNbParams {
        class_log_prior,
        feature_log_prob,
    })
}

impl MultinomialNbParams {
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let scores: Vec<f64> = self
            .class_log_prior
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(&prior, log_prob)| {
                prior
                    + x.entries()
                        .iter()
                        .map(|&(col, v)| v * log_prob[col])
                        .sum::<f64>()
            })
            .collect();
        normalize_log_scores(&scores)
    }

    /// ln P(feature | class), exposed for tests.
    pub fn feature_log_prob(&self, class: usize, feature: usize) -> f64 {
        self.feature_log_prob[class][feature]
    }

    pub fn class_log_prior(&self, class: usize) -> f64 {
        self.class_log_prior[class]
    }
}

/// Log density of a normal distribution, with the variance floored at 1e-9.
pub fn gaussian_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let v = variance.max(1e-9);
    -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - mean) * (x - mean) / (2.0 * v)
}

/// Gaussian naive Bayes over densified feature vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNbParams {
    class_log_prior: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

pub(super) fn fit_gaussian(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    var_smoothing: f64,
) -> GaussianNbParams {
    let dense = densify(features);
    let d = dense[0].len();
    let n = dense.len();

    // overall per-feature variance sets the scale of the floor
    let mut overall_mean = vec![0.0f64; d];
    for row in &dense {
        for (j, &v) in row.iter().enumerate() {
            overall_mean[j] += v;
        }
    }
    for m in &mut overall_mean {
        *m /= n as f64;
    }
    let mut max_var = 0.0f64;
    for j in 0..d {
        let var = dense
            .iter()
            .map(|row| (row[j] - overall_mean[j]).powi(2))
            .sum::<f64>()
            / n as f64;
        max_var = max_var.max(var);
    }
    let floor = if max_var > 0.0 {
        var_smoothing * max_var
    } else {
        var_smoothing
    };

    let mut class_counts = vec![0usize; n_classes];
    let mut means = vec![vec![0.0f64; d]; n_classes];
    for (row, &y) in dense.iter().zip(labels) {
        class_counts[y] += 1;
        for (j, &v) in row.iter().enumerate() {
            means[y][j] += v;
        }
    }
    for (c, row) in means.iter_mut().enumerate() {
        for m in row.iter_mut() {
            *m /= class_counts[c] as f64;
        }
    }
    let mut variances = vec![vec![0.0f64; d]; n_classes];
    for (row, &y) in dense.iter().zip(labels) {
        for (j, &v) in row.iter().enumerate() {
            variances[y][j] += (v - means[y][j]).powi(2);
        }
    }
    for (c, row) in variances.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = (*v / class_counts[c] as f64).max(floor);
        }
    }
    let class_log_prior = class_counts
        .iter()
        .map(|&c| (c as f64 / n as f64).ln())
        .collect();
    GaussianNbParams {
        class_log_prior,
        means,
        variances,
    }
}

impl GaussianNbParams {
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let dense = x.to_dense();
        let scores: Vec<f64> = self
            .class_log_prior
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                prior
                    + dense
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| gaussian_log_pdf(v, self.means[c][j], self.variances[c][j]))
                        .sum::<f64>()
            })
            .collect();
        normalize_log_scores(&scores)
    }

    pub fn predict(&self, x: &SparseVector) -> usize {
        argmax_tie_low(&self.predict_proba(x))
    }
}
