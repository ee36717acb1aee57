//! One-hidden-layer perceptron: ReLU units, softmax output, cross-entropy
//! loss, Adam updates over mini-batches.
//!
//! Parameters live in one flat array (`w1 | b1 | w2 | b2`) so the Adam
//! state, serialization, and finite-difference gradient checks all operate
//! on a single buffer.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::seeding::{derive_seed, rng_from_seed};

use super::softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpDims {
    pub n_features: usize,
    pub hidden: usize,
    pub n_classes: usize,
}

impl MlpDims {
    pub fn n_params(&self) -> usize {
        self.hidden * self.n_features
            + self.hidden
            + self.n_classes * self.hidden
            + self.n_classes
    }

    fn w1(&self, unit: usize, feature: usize) -> usize {
        unit * self.n_features + feature
    }

    fn b1(&self, unit: usize) -> usize {
        self.hidden * self.n_features + unit
    }

    fn w2(&self, class: usize, unit: usize) -> usize {
        self.hidden * self.n_features + self.hidden + class * self.hidden + unit
    }

    fn b2(&self, class: usize) -> usize {
        self.hidden * self.n_features + self.hidden + self.n_classes * self.hidden + class
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams {
    dims: MlpDims,
    values: Vec<f64>,
}

impl MlpParams {
    pub fn dims(&self) -> MlpDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn zeros(dims: MlpDims) -> Self {
        MlpParams {
            dims,
            values: vec![0.0; dims.n_params()],
        }
    }

    /// Glorot-uniform weights, zero biases, drawn from the given seed.
    pub fn glorot_init(dims: MlpDims, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut params = MlpParams::zeros(dims);
        let limit1 = (6.0 / (dims.n_features + dims.hidden) as f64).sqrt();
        for unit in 0..dims.hidden {
            for feature in 0..dims.n_features {
                params.values[dims.w1(unit, feature)] = rng.gen_range(-limit1..limit1);
            }
        }
        let limit2 = (6.0 / (dims.hidden + dims.n_classes) as f64).sqrt();
        for class in 0..dims.n_classes {
            for unit in 0..dims.hidden {
                params.values[dims.w2(class, unit)] = rng.gen_range(-limit2..limit2);
            }
        }
        params
    }

    fn forward(&self, x: &SparseVector) -> (Vec<f64>, Vec<f64>) {
        let dims = self.dims;
        let mut z1 = vec![0.0f64; dims.hidden];
        for unit in 0..dims.hidden {
            let mut acc = self.values[dims.b1(unit)];
            for &(col, v) in x.entries() {
                acc += self.values[dims.w1(unit, col)] * v;
            }
            z1[unit] = acc;
        }
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = vec![0.0f64; dims.n_classes];
        for class in 0..dims.n_classes {
            let mut acc = self.values[dims.b2(class)];
            for unit in 0..dims.hidden {
                acc += self.values[dims.w2(class, unit)] * a1[unit];
            }
            logits[class] = acc;
        }
        (z1, logits)
    }

    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let (_, logits) = self.forward(x);
        softmax(&logits)
    }
}

/// Mean cross-entropy over a batch and its gradient with respect to every
/// parameter, in the same flat layout as [`MlpParams`].
pub fn mlp_loss_and_grad(params: &MlpParams, xs: &[SparseVector], ys: &[usize]) -> (f64, MlpParams) {
    let dims = params.dims;
    let n = xs.len() as f64;
    let mut grad = MlpParams::zeros(dims);
    let mut loss = 0.0;

    for (x, &y) in xs.iter().zip(ys) {
        let (z1, logits) = params.forward(x);
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let probs = softmax(&logits);
        loss -= probs[y].max(1e-300).ln();

        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| (p - if c == y { 1.0 } else { 0.0 }) / n)
            .collect();
        let mut da1 = vec![0.0f64; dims.hidden];
        for class in 0..dims.n_classes {
            let dz = dlogits[class];
            grad.values[dims.b2(class)] += dz;
            for unit in 0..dims.hidden {
                grad.values[dims.w2(class, unit)] += dz * a1[unit];
                da1[unit] += params.values[dims.w2(class, unit)] * dz;
            }
        }
        for unit in 0..dims.hidden {
            if z1[unit] > 0.0 {
                let dz = da1[unit];
                grad.values[dims.b1(unit)] += dz;
                for &(col, v) in x.entries() {
                    grad.values[dims.w1(unit, col)] += dz * v;
                }
            }
        }
    }
    (loss / n, grad)
}

#[derive(Debug, Clone, Copy)]
pub(super) struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

pub(super) fn fit_mlp(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    config: MlpConfig,
) -> MlpParams {
    let dims = MlpDims {
        n_features: features[0].dim(),
        hidden: config.hidden,
        n_classes,
    };
    let mut params = MlpParams::glorot_init(dims, derive_seed(config.seed, &["mlp_init"]));
    let mut m = vec![0.0f64; dims.n_params()];
    let mut v = vec![0.0f64; dims.n_params()];
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, &["mlp_shuffle"]));
    let mut order: Vec<usize> = (0..features.len()).collect();
    let eps = 1e-8;
    let mut t = 0u64;

    let mut batch_x: Vec<SparseVector> = Vec::with_capacity(config.batch_size);
    let mut batch_y: Vec<usize> = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(features[i].clone());
                batch_y.push(labels[i]);
            }
            let (_, grad) = mlp_loss_and_grad(&params, &batch_x, &batch_y);
            t += 1;
            let bias1 = 1.0 - config.beta1.powi(t as i32);
            let bias2 = 1.0 - config.beta2.powi(t as i32);
            for (i, g) in grad.values.iter().enumerate() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                params.values[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    params
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
    fn mlp_learns_xor() {
        let xs = vec![
            sv(&[0.0, 0.0]),
            sv(&[0.0, 1.0]),
            sv(&[1.0, 0.0]),
            sv(&[1.0, 1.0]),
        ];
        let ys = vec![0, 1, 1, 0];
        let spec = ClassifierSpec::new(
            Algorithm::Mlp {
                hidden: 16,
                epochs: 400,
                batch_size: 4,
                learning_rate: 1e-2,
                beta1: 0.9,
                beta2: 0.999,
            },
            13,
        );
        let model = fit(&spec, &xs, &ys).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y, "wrong at {x:?}");
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let xs = vec![
            sv(&[1.0, 0.1]),
            sv(&[0.8, 0.0]),
            sv(&[0.0, 1.0]),
            sv(&[0.2, 0.9]),
        ];
        let ys = vec![0, 0, 1, 1];
        let spec = ClassifierSpec::new(Algorithm::mlp(), 21);
        let a = fit(&spec, &xs, &ys).unwrap().to_json().unwrap();
        let b = fit(&spec, &xs, &ys).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_and_grad_shapes_match() {
        let dims = MlpDims {
            n_features: 5,
            hidden: 3,
            n_classes: 2,
        };
        let params = MlpParams::glorot_init(dims, 1);
        let xs = vec![sv(&[0.1, 0.0, 0.3, 0.0, 0.5])];
        let (loss, grad) = mlp_loss_and_grad(&params, &xs, &[1]);
        assert!(loss.is_finite());
        assert_eq!(grad.values().len(), dims.n_params());
    }
}
