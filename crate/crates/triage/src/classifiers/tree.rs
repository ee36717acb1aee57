//! CART decision tree with Gini impurity.
//!
//! Split search scans features in ascending index order and candidate
//! thresholds in ascending value order, replacing the incumbent only on a
//! strict impurity improvement, so ties resolve to the lowest feature index
//! and then the lowest threshold.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

use super::{argmax_tie_low, densify};

/// Gini impurity `1 - sum(p_c^2)` of a class-count histogram.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("gini impurity of an empty histogram"));
    }
    Ok(gini_from_hist(
        &counts.iter().map(|&c| c as f64).collect::<Vec<_>>(),
        total as f64,
    ))
}

fn gini_from_hist(hist: &[f64], total: f64) -> f64 {
    1.0 - hist.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    nodes: Vec<Node>,
}

impl TreeParams {
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        self.predict_proba_dense(&x.to_dense())
    }

    pub(super) fn predict_proba_dense(&self, row: &[f64]) -> Vec<f64> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs.clone(),
                Node::Split {
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

    pub(super) fn predict_dense(&self, row: &[f64]) -> usize {
        argmax_tie_low(&self.predict_proba_dense(row))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

pub(super) struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub n_classes: usize,
    /// features considered per split; `None` means all
    pub feature_subsample: Option<usize>,
}

pub(super) struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
}

/// Find the impurity-minimizing `(feature, threshold)` over the given rows,
/// considering only `features`. Returns `None` when no feature admits a
/// boundary between two distinct values.
fn best_split(
    data: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
    features: &[usize],
    n_classes: usize,
) -> Option<BestSplit> {
    let n = rows.len() as f64;
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for &f in features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data[r][f], labels[r])));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left = vec![0.0f64; n_classes];
        let mut right = vec![0.0f64; n_classes];
        for &(_, y) in sorted.iter() {
            right[y] += 1.0;
        }
        for i in 0..sorted.len() - 1 {
            let (v, y) = sorted[i];
            left[y] += 1.0;
            right[y] -= 1.0;
            let next_v = sorted[i + 1].0;
            if next_v == v {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = n - nl;
            let weighted =
                (nl * gini_from_hist(&left, nl) + nr * gini_from_hist(&right, nr)) / n;
            let better = match &best {
                None => true,
                Some(b) => weighted < b.weighted_impurity,
            };
            if better {
                best = Some(BestSplit {
                    feature: f,
                    threshold: (v + next_v) / 2.0,
                    weighted_impurity: weighted,
                });
            }
        }
    }
    best
}

fn build_node(
    data: &[Vec<f64>],
    labels: &[usize],
    rows: Vec<usize>,
    depth: usize,
    config: &TreeConfig,
    mut rng: Option<&mut ChaCha8Rng>,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut hist = vec![0.0f64; config.n_classes];
    for &r in &rows {
        hist[labels[r]] += 1.0;
    }
    let n = rows.len() as f64;
    let impurity = gini_from_hist(&hist, n);
    let make_leaf = |nodes: &mut Vec<Node>| {
        let probs: Vec<f64> = hist.iter().map(|&c| c / n).collect();
        nodes.push(Node::Leaf { probs });
        nodes.len() - 1
    };

    if impurity == 0.0 || depth >= config.max_depth || rows.len() < config.min_samples_split {
        return make_leaf(nodes);
    }

    let d = data[0].len();
    let feature_pool: Vec<usize> = match (config.feature_subsample, rng.as_deref_mut()) {
        (Some(m), Some(rng)) if m < d => {
            // partial Fisher-Yates for m distinct features, then sort so the
            // tie rule stays "lowest index first"
            let mut idx: Vec<usize> = (0..d).collect();
            for i in 0..m {
                let j = rand::Rng::gen_range(rng, i..d);
                idx.swap(i, j);
            }
            let mut chosen = idx[..m].to_vec();
            chosen.sort_unstable();
            chosen
        }
        _ => (0..d).collect(),
    };

    let split = match best_split(data, labels, &rows, &feature_pool, config.n_classes) {
        Some(s) if s.weighted_impurity < impurity => s,
        _ => return make_leaf(nodes),
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| data[r][split.feature] <= split.threshold);

    // reserve the split slot before recursing so child indices are stable
    nodes.push(Node::Leaf { probs: Vec::new() });
    let at = nodes.len() - 1;
    let left = build_node(
        data,
        labels,
        left_rows,
        depth + 1,
        config,
        rng.as_deref_mut(),
        nodes,
    );
    let right = build_node(data, labels, right_rows, depth + 1, config, rng, nodes);
    nodes[at] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

/// Grow a tree over all rows with every feature available at each split.
pub(super) fn fit_tree(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    max_depth: usize,
    min_samples_split: usize,
) -> TreeParams {
    let dense = densify(features);
    let config = TreeConfig {
        max_depth,
        min_samples_split,
        n_classes,
        feature_subsample: None,
    };
    let mut nodes = Vec::new();
    build_node(
        &dense,
        labels,
        (0..dense.len()).collect(),
        0,
        &config,
        None,
        &mut nodes,
    );
    TreeParams { nodes }
}

/// Grow a tree for a forest: explicit row set, per-split feature
/// subsampling driven by the forest's RNG.
pub(super) fn fit_tree_on_rows(
    data: &[Vec<f64>],
    labels: &[usize],
    rows: Vec<usize>,
    config: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> TreeParams {
    let mut nodes = Vec::new();
    build_node(data, labels, rows, 0, config, Some(rng), &mut nodes);
    TreeParams { nodes }
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
    fn gini_values_by_hand() {
        assert_eq!(gini_impurity(&[7, 0]).unwrap(), 0.0);
        assert!((gini_impurity(&[5, 5]).unwrap() - 0.5).abs() < 1e-12);
        assert!((gini_impurity(&[2, 1]).unwrap() - 4.0 / 9.0).abs() < 1e-12);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn tree_fits_xor() {
        // depth-2 tree handles xor; a single split cannot
        let xs = vec![
            sv(&[0.0, 0.0]),
            sv(&[0.0, 1.0]),
            sv(&[1.0, 0.0]),
            sv(&[1.0, 1.0]),
        ];
        let ys = vec![0, 1, 1, 0];
        let spec = ClassifierSpec::new(Algorithm::decision_tree(), 0);
        let model = fit(&spec, &xs, &ys).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn tree_respects_depth_limit() {
        let xs = vec![
            sv(&[0.0, 0.0]),
            sv(&[0.0, 1.0]),
            sv(&[1.0, 0.0]),
            sv(&[1.0, 1.0]),
        ];
        let ys = vec![0, 1, 1, 0];
        let spec = ClassifierSpec::new(
            Algorithm::DecisionTree {
                max_depth: 1,
                min_samples_split: 2,
            },
            0,
        );
        let model = fit(&spec, &xs, &ys).unwrap();
        // a stump cannot learn xor: at least one point must be wrong
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| model.predict(x).unwrap() == y)
            .count();
        assert!(correct < 4);
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // features 0 and 1 split identically; feature 0 must win
        let xs = vec![sv(&[0.0, 0.0, 1.0]), sv(&[1.0, 1.0, 1.0])];
        let ys = vec![0, 1];
        let params = fit_tree(&xs, &ys, 2, 5, 2);
        match &params.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn leaf_probabilities_reflect_counts() {
        // one feature, identical values -> no split possible, leaf with 2:1 mix
        let xs = vec![sv(&[1.0]), sv(&[1.0]), sv(&[1.0])];
        let ys = vec![0, 0, 1];
        let params = fit_tree(&xs, &ys, 2, 5, 2);
        let probs = params.predict_proba(&sv(&[1.0]));
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
    }
}
