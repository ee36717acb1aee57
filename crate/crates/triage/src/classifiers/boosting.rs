//! Multiclass gradient boosting: per-class regression trees fitted to
//! softmax residuals, mean-residual leaves, shrinkage by the learning rate.
//!
//! Leaf values are the L2 projection of the negative log-loss gradient onto
//! the tree partition, so with a small learning rate the training log-loss
//! is non-increasing round over round; the recorded loss curve is part of
//! the fitted parameters.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

use super::{densify, softmax};

#[derive(Debug, Clone, Serialize, Deserialize)]
enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Sum of squared deviations from the mean over `rows`.
fn sse(targets: &[f64], rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / n;
    rows.iter().map(|&r| (targets[r] - mean).powi(2)).sum()
}

fn build_reg_node(
    data: &[Vec<f64>],
    targets: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    nodes: &mut Vec<RegNode>,
) -> usize {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / n;
    let make_leaf = |nodes: &mut Vec<RegNode>| {
        nodes.push(RegNode::Leaf { value: mean });
        nodes.len() - 1
    };
    if depth >= max_depth || rows.len() < 2 {
        return make_leaf(nodes);
    }
    let parent_sse = sse(targets, &rows);
    if parent_sse == 0.0 {
        return make_leaf(nodes);
    }

    let d = data[0].len();
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, child sse)
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for f in 0..d {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data[r][f], targets[r])));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // running sums allow O(1) SSE via sum of squares minus mean term
        let total_sum: f64 = sorted.iter().map(|&(_, t)| t).sum();
        let total_sq: f64 = sorted.iter().map(|&(_, t)| t * t).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..sorted.len() - 1 {
            let (v, t) = sorted[i];
            left_sum += t;
            left_sq += t * t;
            let next_v = sorted[i + 1].0;
            if next_v == v {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = n - nl;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let child_sse =
                (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            let better = match &best {
                None => true,
                Some((_, _, b)) => child_sse < *b,
            };
            if better {
                best = Some((f, (v + next_v) / 2.0, child_sse));
            }
        }
    }

    let (feature, threshold, child_sse) = match best {
        Some(b) if b.2 < parent_sse => b,
        _ => return make_leaf(nodes),
    };
    let _ = child_sse;

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| data[r][feature] <= threshold);

    nodes.push(RegNode::Leaf { value: 0.0 });
    let at = nodes.len() - 1;
    let left = build_reg_node(data, targets, left_rows, depth + 1, max_depth, nodes);
    let right = build_reg_node(data, targets, right_rows, depth + 1, max_depth, nodes);
    nodes[at] = RegNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    at
}

fn fit_reg_tree(data: &[Vec<f64>], targets: &[f64], max_depth: usize) -> RegTree {
    let mut nodes = Vec::new();
    build_reg_node(
        data,
        targets,
        (0..data.len()).collect(),
        0,
        max_depth,
        &mut nodes,
    );
    RegTree { nodes }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostParams {
    /// trees[round][class]
    trees: Vec<Vec<RegTree>>,
    learning_rate: f64,
    n_classes: usize,
    /// mean training log-loss before any round, then after each round
    train_log_loss: Vec<f64>,
}

fn mean_log_loss(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut loss = 0.0;
    for (row, &y) in scores.iter().zip(labels) {
        let p = softmax(row);
        loss -= p[y].max(1e-15).ln();
    }
    loss / labels.len() as f64
}

pub(super) fn fit_boosting(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    n_rounds: usize,
    max_depth: usize,
    learning_rate: f64,
) -> BoostParams {
    let dense = densify(features);
    let n = dense.len();
    let mut scores = vec![vec![0.0f64; n_classes]; n];
    let mut trees = Vec::with_capacity(n_rounds);
    let mut train_log_loss = Vec::with_capacity(n_rounds + 1);
    train_log_loss.push(mean_log_loss(&scores, labels));

    let mut residuals = vec![0.0f64; n];
    for _ in 0..n_rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|row| softmax(row)).collect();
        let mut round_trees = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            for i in 0..n {
                let y = if labels[i] == c { 1.0 } else { 0.0 };
                residuals[i] = y - probs[i][c];
            }
            let tree = fit_reg_tree(&dense, &residuals, max_depth);
            for i in 0..n {
                scores[i][c] += learning_rate * tree.predict(&dense[i]);
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
        train_log_loss.push(mean_log_loss(&scores, labels));
    }
    BoostParams {
        trees,
        learning_rate,
        n_classes,
        train_log_loss,
    }
}

impl BoostParams {
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let row = x.to_dense();
        let mut scores = vec![0.0f64; self.n_classes];
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                scores[c] += self.learning_rate * tree.predict(&row);
            }
        }
        softmax(&scores)
    }

    pub fn train_log_loss(&self) -> &[f64] {
        &self.train_log_loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{boosting_loss_curve, fit, Algorithm, ClassifierSpec};

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

    fn three_class_data() -> (Vec<SparseVector>, Vec<usize>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..6 {
            let jitter = i as f64 * 0.02;
            xs.push(sv(&[1.0 + jitter, 0.0, jitter]));
            ys.push(0);
            xs.push(sv(&[0.0, 1.0 - jitter, jitter]));
            ys.push(1);
            xs.push(sv(&[jitter, jitter, 1.0 + jitter]));
            ys.push(2);
        }
        (xs, ys)
    }

    #[test]
    fn boosting_learns_three_classes() {
        let (xs, ys) = three_class_data();
        let spec = ClassifierSpec::new(
            Algorithm::GradientBoosting {
                n_rounds: 30,
                max_depth: 3,
                learning_rate: 0.1,
            },
            0,
        );
        let model = fit(&spec, &xs, &ys).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let (xs, ys) = three_class_data();
        let spec = ClassifierSpec::new(
            Algorithm::GradientBoosting {
                n_rounds: 50,
                max_depth: 3,
                learning_rate: 0.1,
            },
            0,
        );
        let model = fit(&spec, &xs, &ys).unwrap();
        let curve = boosting_loss_curve(&model).unwrap();
        assert_eq!(curve.len(), 51);
        // starts at ln(3) for three balanced classes
        assert!((curve[0] - 3.0f64.ln()).abs() < 1e-12);
        for w in curve.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn regression_tree_fits_mean_on_constant_features() {
        let data = vec![vec![1.0], vec![1.0], vec![1.0]];
        let tree = fit_reg_tree(&data, &[1.0, 2.0, 3.0], 3);
        assert!((tree.predict(&[1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regression_tree_splits_on_signal() {
        let data = vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]];
        let tree = fit_reg_tree(&data, &[-1.0, -1.0, 1.0, 1.0], 3);
        assert!((tree.predict(&[0.05]) + 1.0).abs() < 1e-12);
        assert!((tree.predict(&[0.95]) - 1.0).abs() < 1e-12);
    }
}
