//! Linear and RBF-kernel SVMs trained with the Pegasos stochastic
//! subgradient method, one-vs-rest for multiclass. Probabilities come from
//! a softmax over the per-class margins.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::seeding::{derive_seed, rng_from_seed};

use super::softmax;

/// One Pegasos update: the weights always shrink by `1 - step * lambda`;
/// the margin term (evaluated at the incoming weights) is added only when
/// `y * (w.x + b) < 1`. The bias is not regularized.
pub fn hinge_subgradient_step(
    weights: &[f64],
    bias: f64,
    x: &SparseVector,
    y: f64,
    lambda: f64,
    step: f64,
) -> (Vec<f64>, f64) {
    let mut w = weights.to_vec();
    let mut b = bias;
    hinge_step_mut(&mut w, &mut b, x, y, lambda, step);
    (w, b)
}

fn hinge_step_mut(w: &mut [f64], b: &mut f64, x: &SparseVector, y: f64, lambda: f64, step: f64) {
    let margin = y * (x.dot_dense(w) + *b);
    let shrink = 1.0 - step * lambda;
    for v in w.iter_mut() {
        *v *= shrink;
    }
    if margin < 1.0 {
        for &(col, xv) in x.entries() {
            w[col] += step * y * xv;
        }
        *b += step * y;
    }
}

/// `exp(-gamma * ||u - v||^2)`.
pub fn rbf_kernel(u: &SparseVector, v: &SparseVector, gamma: f64) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok((-gamma * u.sq_dist(v)).exp())
}

/// RBF bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// 1 / n_features
    Auto,
    Fixed(f64),
}

impl Gamma {
    fn resolve(self, n_features: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / n_features.max(1) as f64,
            Gamma::Fixed(g) => g,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSvmParams {
    /// one (weights, bias) pair per class
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

pub(super) fn fit_linear_svm(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> LinearSvmParams {
    let d = features[0].dim();
    let n = features.len();
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut rng = rng_from_seed(derive_seed(seed, &["linear_svm", &class.to_string()]));
        let mut w = vec![0.0f64; d];
        let mut b = 0.0f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let step = 1.0 / (lambda * t as f64);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                hinge_step_mut(&mut w, &mut b, &features[i], y, lambda, step);
            }
        }
        weights.push(w);
        biases.push(b);
    }
    LinearSvmParams { weights, biases }
}

impl LinearSvmParams {
    fn margins(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| x.dot_dense(w) + b)
            .collect()
    }

    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        softmax(&self.margins(x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfSvmParams {
    support: Vec<SparseVector>,
    /// coefs[class][support index] = alpha * y / (lambda * T)
    coefs: Vec<Vec<f64>>,
    gamma: f64,
}

pub(super) fn fit_rbf_svm(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    gamma: Gamma,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> RbfSvmParams {
    let n = features.len();
    let gamma = gamma.resolve(features[0].dim());

    // the full kernel matrix is tiny at this scale and shared by all classes
    let mut kernel = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = (-gamma * features[i].sq_dist(&features[j])).exp();
            kernel[i][j] = k;
            kernel[j][i] = k;
        }
    }

    let total_steps = (epochs * n) as f64;
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut rng = rng_from_seed(derive_seed(seed, &["rbf_svm", &class.to_string()]));
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut alpha = vec![0.0f64; n];
        // score[i] = sum_j alpha_j y_j K[j][i], maintained incrementally
        let mut score = vec![0.0f64; n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let margin = y[i] * score[i] / (lambda * t as f64);
                if margin < 1.0 {
                    alpha[i] += 1.0;
                    for j in 0..n {
                        score[j] += y[i] * kernel[i][j];
                    }
                }
            }
        }
        alphas.push(alpha.iter().zip(&y).map(|(&a, &yy)| a * yy).collect());
    }

    // keep only vectors that support at least one class
    let mut support = Vec::new();
    let mut coefs = vec![Vec::new(); n_classes];
    for i in 0..n {
        if alphas.iter().any(|a| a[i] != 0.0) {
            support.push(features[i].clone());
            for (c, a) in alphas.iter().enumerate() {
                coefs[c].push(a[i] / (lambda * total_steps));
            }
        }
    }
    RbfSvmParams {
        support,
        coefs,
        gamma,
    }
}

impl RbfSvmParams {
    fn margins(&self, x: &SparseVector) -> Vec<f64> {
        let k: Vec<f64> = self
            .support
            .iter()
            .map(|s| (-self.gamma * s.sq_dist(x)).exp())
            .collect();
        self.coefs
            .iter()
            .map(|c| c.iter().zip(&k).map(|(&ci, &ki)| ci * ki).sum())
            .collect()
    }

    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        softmax(&self.margins(x))
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, Algorithm, ClassifierSpec};

    fn sv(values: &[f64]) -> SparseVector {
        SparseVector::new(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
            values.len(),
        )
        .unwrap()
    }

    #[test]
    fn hinge_step_no_violation_keeps_weights() {
        let w = vec![2.0, 0.0];
        let x = sv(&[1.0, 0.0]);
        let (w2, b2) = hinge_subgradient_step(&w, 0.0, &x, 1.0, 0.0, 0.5);
        assert_eq!(w2, vec![2.0, 0.0]);
        assert_eq!(b2, 0.0);
    }

    #[test]
    fn hinge_step_from_origin_by_hand() {
        let w = vec![0.0, 0.0];
        let x = sv(&[1.0, 0.0]);
        let (w2, b2) = hinge_subgradient_step(&w, 0.0, &x, 1.0, 0.0, 0.5);
        assert_eq!(w2, vec![0.5, 0.0]);
        assert_eq!(b2, 0.5);
    }

    #[test]
    fn hinge_step_descends_for_small_steps() {
        // loss = max(0, 1 - y (w.x + b)) + lambda/2 ||w||^2
        let loss = |w: &[f64], b: f64, x: &SparseVector, y: f64, lambda: f64| {
            let margin = 1.0 - y * (x.dot_dense(w) + b);
            margin.max(0.0) + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
        };
        let x = sv(&[0.8, -0.4, 0.1]);
        let y = -1.0;
        let lambda = 0.1;
        let w = vec![0.3, -0.2, 0.5];
        let b = 0.1;
        let before = loss(&w, b, &x, y, lambda);
        let (w2, b2) = hinge_subgradient_step(&w, b, &x, y, lambda, 1e-3);
        let after = loss(&w2, b2, &x, y, lambda);
        assert!(after <= before, "loss rose from {before} to {after}");
    }

    #[test]
    fn rbf_kernel_values() {
        let u = sv(&[1.0, 0.0]);
        let v = sv(&[0.0, 1.0]);
        assert_eq!(rbf_kernel(&u, &u, 3.7).unwrap(), 1.0);
        assert_eq!(rbf_kernel(&u, &v, 0.0).unwrap(), 1.0);
        // squared distance 2, gamma 0.5 -> e^-1
        let k = rbf_kernel(&u, &v, 0.5).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        let w = sv(&[1.0, 0.0, 0.0]);
        assert!(rbf_kernel(&u, &w, 1.0).is_err());
    }

    fn separable() -> (Vec<SparseVector>, Vec<usize>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..10 {
            let eps = i as f64 * 0.01;
            xs.push(sv(&[1.0, eps]));
            ys.push(0);
            xs.push(sv(&[eps, 1.0]));
            ys.push(1);
        }
        (xs, ys)
    }

    #[test]
    fn linear_svm_separates() {
        let (xs, ys) = separable();
        let spec = ClassifierSpec::new(Algorithm::linear_svm(), 3);
        let model = fit(&spec, &xs, &ys).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn rbf_svm_separates() {
        let (xs, ys) = separable();
        let spec = ClassifierSpec::new(
            Algorithm::RbfSvm {
                gamma: Gamma::Fixed(1.0),
                lambda: 1e-4,
                epochs: 20,
            },
            3,
        );
        let model = fit(&spec, &xs, &ys).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn svm_training_is_deterministic() {
        let (xs, ys) = separable();
        for alg in [Algorithm::linear_svm(), Algorithm::rbf_svm()] {
            let spec = ClassifierSpec::new(alg, 11);
            let a = fit(&spec, &xs, &ys).unwrap().to_json().unwrap();
            let b = fit(&spec, &xs, &ys).unwrap().to_json().unwrap();
            assert_eq!(a, b);
        }
    }
}
