//! Nine classical classifiers behind one train/predict interface.
//!
//! Every algorithm here is trained in double precision with an explicitly
//! seeded RNG, so fitting the same spec on the same data twice produces
//! bit-identical parameters. Models are immutable after [`fit`] and safe to
//! share across threads for prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

mod boosting;
mod forest;
mod linear;
mod mlp;
mod naive_bayes;
mod svm;
mod tree;

pub use boosting::BoostParams;
pub use forest::{FeatureSubsample, ForestParams};
pub use linear::{logistic_loss_and_grad, LogisticParams};
pub use mlp::{mlp_loss_and_grad, MlpDims, MlpParams};
pub use naive_bayes::{gaussian_log_pdf, GaussianNbParams, MultinomialNbParams};
pub use svm::{hinge_subgradient_step, rbf_kernel, Gamma, LinearSvmParams, RbfSvmParams};
pub use tree::{gini_impurity, TreeParams};

/// Algorithm selection with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Algorithm {
    MultinomialNb {
        alpha: f64,
    },
    GaussianNb {
        /// variance floor as a fraction of the largest feature variance
        var_smoothing: f64,
    },
    DecisionTree {
        max_depth: usize,
        min_samples_split: usize,
    },
    RandomForest {
        n_trees: usize,
        max_depth: usize,
        min_samples_split: usize,
        bootstrap: bool,
        feature_subsample: FeatureSubsample,
    },
    GradientBoosting {
        n_rounds: usize,
        max_depth: usize,
        learning_rate: f64,
    },
    LinearSvm {
        lambda: f64,
        epochs: usize,
    },
    RbfSvm {
        gamma: Gamma,
        lambda: f64,
        epochs: usize,
    },
    LogisticRegression {
        l2: f64,
        iterations: usize,
        learning_rate: f64,
    },
    Mlp {
        hidden: usize,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
    },
}

impl Algorithm {
    pub fn multinomial_nb() -> Self {
        Algorithm::MultinomialNb { alpha: 1.0 }
    }

    pub fn gaussian_nb() -> Self {
        Algorithm::GaussianNb {
            var_smoothing: 1e-9,
        }
    }

    pub fn decision_tree() -> Self {
        Algorithm::DecisionTree {
            max_depth: 20,
            min_samples_split: 2,
        }
    }

    pub fn random_forest() -> Self {
        Algorithm::RandomForest {
            n_trees: 100,
            max_depth: 20,
            min_samples_split: 2,
            bootstrap: true,
            feature_subsample: FeatureSubsample::Sqrt,
        }
    }

    pub fn gradient_boosting() -> Self {
        Algorithm::GradientBoosting {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
        }
    }

    pub fn linear_svm() -> Self {
        Algorithm::LinearSvm {
            lambda: 1e-4,
            epochs: 20,
        }
    }

    pub fn rbf_svm() -> Self {
        Algorithm::RbfSvm {
            gamma: Gamma::Auto,
            lambda: 1e-4,
            epochs: 20,
        }
    }

    pub fn logistic_regression() -> Self {
        Algorithm::LogisticRegression {
            l2: 1e-4,
            iterations: 500,
            learning_rate: 0.1,
        }
    }

    pub fn mlp() -> Self {
        Algorithm::Mlp {
            hidden: 100,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    /// The nine algorithms with their default hyperparameters, in the order
    /// the benchmark tables list them.
    pub fn all_defaults() -> Vec<Algorithm> {
        vec![
            Algorithm::gaussian_nb(),
            Algorithm::decision_tree(),
            Algorithm::gradient_boosting(),
            Algorithm::random_forest(),
            Algorithm::linear_svm(),
            Algorithm::rbf_svm(),
            Algorithm::logistic_regression(),
            Algorithm::multinomial_nb(),
            Algorithm::mlp(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MultinomialNb { .. } => "multinomial_nb",
            Algorithm::GaussianNb { .. } => "gaussian_nb",
            Algorithm::DecisionTree { .. } => "decision_tree",
            Algorithm::RandomForest { .. } => "random_forest",
            Algorithm::GradientBoosting { .. } => "gradient_boosting",
            Algorithm::LinearSvm { .. } => "linear_svm",
            Algorithm::RbfSvm { .. } => "rbf_svm",
            Algorithm::LogisticRegression { .. } => "logistic_regression",
            Algorithm::Mlp { .. } => "mlp",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Algorithm::MultinomialNb { .. } => "Multinomial Naive Bayes",
            Algorithm::GaussianNb { .. } => "Gaussian Naive Bayes",
            Algorithm::DecisionTree { .. } => "Decision Tree",
            Algorithm::RandomForest { .. } => "Random Forest",
            Algorithm::GradientBoosting { .. } => "Gradient Boosting",
            Algorithm::LinearSvm { .. } => "Linear SVM",
            Algorithm::RbfSvm { .. } => "RBF kernel SVM",
            Algorithm::LogisticRegression { .. } => "Logistic Regression",
            Algorithm::Mlp { .. } => "MLP",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("{}: {msg}", self.name())));
        match *self {
            Algorithm::MultinomialNb { alpha } if alpha <= 0.0 => bad("alpha must be > 0"),
            Algorithm::GaussianNb { var_smoothing } if var_smoothing <= 0.0 => {
                bad("var_smoothing must be > 0")
            }
            Algorithm::DecisionTree {
                max_depth,
                min_samples_split,
            } if max_depth < 1 || min_samples_split < 2 => {
                bad("max_depth >= 1 and min_samples_split >= 2 required")
            }
            Algorithm::RandomForest {
                n_trees, max_depth, ..
            } if n_trees < 1 || max_depth < 1 => bad("n_trees and max_depth must be >= 1"),
            Algorithm::GradientBoosting {
                n_rounds,
                max_depth,
                learning_rate,
            } if n_rounds < 1 || max_depth < 1 || learning_rate <= 0.0 => {
                bad("n_rounds, max_depth >= 1 and learning_rate > 0 required")
            }
            Algorithm::LinearSvm { lambda, epochs } if lambda <= 0.0 || epochs < 1 => {
                bad("lambda > 0 and epochs >= 1 required")
            }
            Algorithm::RbfSvm { lambda, epochs, gamma } => {
                if lambda <= 0.0 || epochs < 1 {
                    return bad("lambda > 0 and epochs >= 1 required");
                }
                if let Gamma::Fixed(g) = gamma {
                    if g < 0.0 {
                        return bad("gamma must be >= 0");
                    }
                }
                Ok(())
            }
            Algorithm::LogisticRegression {
                l2,
                iterations,
                learning_rate,
            } if l2 < 0.0 || iterations < 1 || learning_rate <= 0.0 => {
                bad("l2 >= 0, iterations >= 1, learning_rate > 0 required")
            }
            Algorithm::Mlp {
                hidden,
                epochs,
                batch_size,
                learning_rate,
                beta1,
                beta2,
            } if hidden < 1
                || epochs < 1
                || batch_size < 1
                || learning_rate <= 0.0
                || !(0.0..1.0).contains(&beta1)
                || !(0.0..1.0).contains(&beta2) =>
            {
                bad("mlp hyperparameters out of range")
            }
            _ => Ok(()),
        }
    }
}

/// Algorithm plus training seed: everything needed to reproduce a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        ClassifierSpec { algorithm, seed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ModelParams {
    MultinomialNb(MultinomialNbParams),
    GaussianNb(GaussianNbParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostParams),
    LinearSvm(LinearSvmParams),
    RbfSvm(RbfSvmParams),
    LogisticRegression(LogisticParams),
    Mlp(MlpParams),
}

/// Immutable fitted classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: ClassifierSpec,
    n_classes: usize,
    n_features: usize,
    params: ModelParams,
}

const MODEL_FORMAT: &str = "triage-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Class probabilities for one feature vector.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.n_features {
            return Err(Error::DimMismatch {
                expected: self.n_features,
                got: x.dim(),
            });
        }
        let probs = match &self.params {
            ModelParams::MultinomialNb(p) => p.predict_proba(x),
            ModelParams::GaussianNb(p) => p.predict_proba(x),
            ModelParams::DecisionTree(p) => p.predict_proba(x),
            ModelParams::RandomForest(p) => p.predict_proba(x),
            ModelParams::GradientBoosting(p) => p.predict_proba(x),
            ModelParams::LinearSvm(p) => p.predict_proba(x),
            ModelParams::RbfSvm(p) => p.predict_proba(x),
            ModelParams::LogisticRegression(p) => p.predict_proba(x),
            ModelParams::Mlp(p) => p.predict_proba(x),
        };
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Ok(probs)
    }

    /// Most probable class; ties break toward the lowest class index.
    pub fn predict(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax_tie_low(&self.predict_proba(x)?))
    }

    pub fn predict_batch(&self, xs: &[SparseVector]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Versioned JSON blob; [`TrainedModel::from_json`] round-trips to a
    /// model with bit-identical predictions.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelEnvelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<TrainedModel> {
        let envelope: ModelEnvelope = serde_json::from_str(json)?;
        if envelope.format != MODEL_FORMAT {
            return Err(Error::invalid(format!(
                "unexpected model format {:?}",
                envelope.format
            )));
        }
        if envelope.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                envelope.version
            )));
        }
        Ok(envelope.model)
    }
}

/// Validate a training matrix and return `(n_classes, n_features)`.
fn validate_training_inputs(
    features: &[SparseVector],
    labels: &[usize],
) -> Result<(usize, usize)> {
    if features.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let n_features = features[0].dim();
    for (i, x) in features.iter().enumerate() {
        if x.dim() != n_features {
            return Err(Error::DimMismatch {
                expected: n_features,
                got: x.dim(),
            });
        }
        for &(_, v) in x.entries() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("feature value in row {i}")));
            }
        }
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    if n_classes < 2 {
        return Err(Error::invalid("training data has a single class"));
    }
    let mut seen = vec![false; n_classes];
    for &y in labels {
        seen[y] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!(
            "class {missing} has no training examples"
        )));
    }
    Ok((n_classes, n_features))
}

/// Train a classifier. Deterministic in `(spec, features, labels)`.
pub fn fit(spec: &ClassifierSpec, features: &[SparseVector], labels: &[usize]) -> Result<TrainedModel> {
    spec.algorithm.validate()?;
    let (n_classes, n_features) = validate_training_inputs(features, labels)?;
    let params = match &spec.algorithm {
        Algorithm::MultinomialNb { alpha } => ModelParams::MultinomialNb(
            naive_bayes::fit_multinomial(features, labels, n_classes, *alpha)?,
        ),
        Algorithm::GaussianNb { var_smoothing } => ModelParams::GaussianNb(
            naive_bayes::fit_gaussian(features, labels, n_classes, *var_smoothing),
        ),
        Algorithm::DecisionTree {
            max_depth,
            min_samples_split,
        } => ModelParams::DecisionTree(tree::fit_tree(
            features,
            labels,
            n_classes,
            *max_depth,
            *min_samples_split,
        )),
        Algorithm::RandomForest {
            n_trees,
            max_depth,
            min_samples_split,
            bootstrap,
            feature_subsample,
        } => ModelParams::RandomForest(forest::fit_forest(
            features,
            labels,
            n_classes,
            forest::ForestConfig {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
                bootstrap: *bootstrap,
                feature_subsample: *feature_subsample,
                seed: spec.seed,
            },
        )),
        Algorithm::GradientBoosting {
            n_rounds,
            max_depth,
            learning_rate,
        } => ModelParams::GradientBoosting(boosting::fit_boosting(
            features,
            labels,
            n_classes,
            *n_rounds,
            *max_depth,
            *learning_rate,
        )),
        Algorithm::LinearSvm { lambda, epochs } => ModelParams::LinearSvm(
            svm::fit_linear_svm(features, labels, n_classes, *lambda, *epochs, spec.seed),
        ),
        Algorithm::RbfSvm {
            gamma,
            lambda,
            epochs,
        } => ModelParams::RbfSvm(svm::fit_rbf_svm(
            features, labels, n_classes, *gamma, *lambda, *epochs, spec.seed,
        )),
        Algorithm::LogisticRegression {
            l2,
            iterations,
            learning_rate,
        } => ModelParams::LogisticRegression(linear::fit_logistic(
            features,
            labels,
            n_classes,
            *l2,
            *iterations,
            *learning_rate,
        )),
        Algorithm::Mlp {
            hidden,
            epochs,
            batch_size,
            learning_rate,
            beta1,
            beta2,
        } => ModelParams::Mlp(mlp::fit_mlp(
            features,
            labels,
            n_classes,
            mlp::MlpConfig {
                hidden: *hidden,
                epochs: *epochs,
                batch_size: *batch_size,
                learning_rate: *learning_rate,
                beta1: *beta1,
                beta2: *beta2,
                seed: spec.seed,
            },
        )),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        n_classes,
        n_features,
        params,
    })
}

/// Training log-loss per boosting round, when the model is a gradient
/// boosting ensemble.
pub fn boosting_loss_curve(model: &TrainedModel) -> Option<&[f64]> {
    match &model.params {
        ModelParams::GradientBoosting(p) => Some(p.train_log_loss()),
        _ => None,
    }
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Normalize log scores into probabilities via log-sum-exp.
pub fn normalize_log_scores(log_scores: &[f64]) -> Vec<f64> {
    softmax(log_scores)
}

pub(crate) fn densify(features: &[SparseVector]) -> Vec<Vec<f64>> {
    features.iter().map(SparseVector::to_dense).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0, 0.0]);
        for v in p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_on_tie() {
        assert_eq!(argmax_tie_low(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax_tie_low(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax_tie_low(&[0.0, 0.0, 1.0]), 2);
    }

    #[test]
    fn fit_rejects_single_class() {
        let xs = vec![sv(&[1.0, 0.0]), sv(&[0.0, 1.0])];
        let spec = ClassifierSpec::new(Algorithm::multinomial_nb(), 0);
        assert!(fit(&spec, &xs, &[0, 0]).is_err());
    }

    #[test]
    fn fit_rejects_missing_class() {
        let xs = vec![sv(&[1.0, 0.0]), sv(&[0.0, 1.0])];
        let spec = ClassifierSpec::new(Algorithm::multinomial_nb(), 0);
        // class 1 absent even though class 2 is present
        assert!(fit(&spec, &xs, &[0, 2]).is_err());
    }

    #[test]
    fn fit_rejects_dim_mismatch() {
        let xs = vec![sv(&[1.0, 0.0]), sv(&[0.0, 1.0, 2.0])];
        let spec = ClassifierSpec::new(Algorithm::multinomial_nb(), 0);
        assert!(fit(&spec, &xs, &[0, 1]).is_err());
    }

    #[test]
    fn predict_rejects_dim_mismatch() {
        let xs = vec![sv(&[1.0, 0.0]), sv(&[0.0, 1.0])];
        let spec = ClassifierSpec::new(Algorithm::multinomial_nb(), 0);
        let model = fit(&spec, &xs, &[0, 1]).unwrap();
        assert!(model.predict(&sv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(Algorithm::MultinomialNb { alpha: 0.0 }.validate().is_err());
        assert!(Algorithm::DecisionTree {
            max_depth: 0,
            min_samples_split: 2
        }
        .validate()
        .is_err());
        assert!(Algorithm::LogisticRegression {
            l2: -1.0,
            iterations: 10,
            learning_rate: 0.1
        }
        .validate()
        .is_err());
        for alg in Algorithm::all_defaults() {
            alg.validate().unwrap();
        }
    }

    #[test]
    fn model_json_round_trip_is_prediction_exact() {
        let xs = vec![
            sv(&[2.0, 1.0]),
            sv(&[1.5, 0.5]),
            sv(&[0.0, 2.0]),
            sv(&[0.5, 1.5]),
        ];
        let ys = vec![0, 0, 1, 1];
        for alg in Algorithm::all_defaults() {
            let spec = ClassifierSpec::new(alg, 7);
            let model = fit(&spec, &xs, &ys).unwrap();
            let json = model.to_json().unwrap();
            let back = TrainedModel::from_json(&json).unwrap();
            for x in &xs {
                let a = model.predict_proba(x).unwrap();
                let b = back.predict_proba(x).unwrap();
                assert_eq!(a, b, "round trip drift for {}", model.spec().algorithm.name());
            }
        }
    }

    #[test]
    fn from_json_rejects_garbage_and_wrong_version() {
        assert!(TrainedModel::from_json("not json").is_err());
        let xs = vec![sv(&[1.0, 0.0]), sv(&[0.0, 1.0])];
        let spec = ClassifierSpec::new(Algorithm::multinomial_nb(), 0);
        let model = fit(&spec, &xs, &[0, 1]).unwrap();
        let json = model.to_json().unwrap();
        let tampered = json.replace("\"version\":1", "\"version\":99");
        assert!(TrainedModel::from_json(&tampered).is_err());
    }
}
