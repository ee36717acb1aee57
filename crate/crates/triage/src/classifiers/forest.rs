//! Random forest: bagged CART trees with per-split feature subsampling and
//! hard majority voting.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::seeding::{derive_seed, rng_from_seed};

use super::tree::{fit_tree_on_rows, TreeConfig, TreeParams};
use super::densify;

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubsample {
    /// ceil(sqrt(d)) features per split
    Sqrt,
    /// every feature, as in a plain decision tree
    All,
}

#[derive(Debug, Clone)]
pub(super) struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub feature_subsample: FeatureSubsample,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    trees: Vec<TreeParams>,
}

pub(super) fn fit_forest(
    features: &[SparseVector],
    labels: &[usize],
    n_classes: usize,
    config: ForestConfig,
) -> ForestParams {
    let dense = densify(features);
    let n = dense.len();
    let d = dense[0].len();
    let subsample = match config.feature_subsample {
        FeatureSubsample::Sqrt => Some((d as f64).sqrt().ceil() as usize),
        FeatureSubsample::All => None,
    };
    let tree_config = TreeConfig {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        n_classes,
        feature_subsample: subsample,
    };
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng = rng_from_seed(derive_seed(config.seed, &["tree", &t.to_string()]));
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(fit_tree_on_rows(&dense, labels, rows, &tree_config, &mut rng));
    }
    ForestParams { trees }
}

impl ForestParams {
    /// Fraction of trees voting for each class. The argmax of this vector
    /// is exactly the majority vote with lowest-index tie-breaking.
    pub(super) fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let row = x.to_dense();
        let n_classes = self.trees[0].predict_proba_dense(&row).len();
        let mut votes = vec![0.0f64; n_classes];
        for tree in &self.trees {
            votes[tree.predict_dense(&row)] += 1.0;
        }
        let total = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
