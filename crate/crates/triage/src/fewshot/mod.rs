//! Few-shot classification over sentence embeddings: sample a support set,
//! generate labeled sentence pairs, fine-tune an affine projection head
//! with a cosine-similarity regression loss, then fit an MLP on the
//! projected embeddings.
//!
//! The embedding model itself stays frozen behind [`EmbeddingProvider`];
//! only the projection head trains, which keeps the contrastive training
//! loop self-contained while letting a real sentence-transformer service
//! plug in through [`RemoteEmbedder`].

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, Algorithm, ClassifierSpec, TrainedModel};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::seeding::{derive_seed, rng_from_seed};

mod provider;

pub use provider::{
    EmbeddingProvider, HashedEmbedder, HttpPostJson, RemoteEmbedder, UreqTransport,
    EMBED_BATCH_CAP,
};

/// A sentence pair with a binary similarity target: 1.0 when the source
/// reports share a class, 0.0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub text_a: String,
    pub text_b: String,
    pub target: f64,
}

/// Trainable affine map applied on top of frozen embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    /// weights[input][output]
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl ProjectionHead {
    /// Identity weights (truncated or zero-padded if rectangular) and zero
    /// bias, so an untrained head reproduces raw embedding geometry.
    pub fn identity(dim_in: usize, dim_out: usize) -> Result<Self> {
        if dim_out < 2 {
            return Err(Error::invalid("projection head needs dim_out >= 2"));
        }
        let mut weights = vec![vec![0.0f64; dim_out]; dim_in];
        for i in 0..dim_in.min(dim_out) {
            weights[i][i] = 1.0;
        }
        Ok(ProjectionHead {
            weights,
            bias: vec![0.0; dim_out],
        })
    }

    pub fn dim_in(&self) -> usize {
        self.weights.len()
    }

    pub fn dim_out(&self) -> usize {
        self.bias.len()
    }

    pub fn project(&self, embedding: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, &e) in embedding.iter().enumerate() {
            if e != 0.0 {
                for (o, w) in self.weights[i].iter().enumerate() {
                    out[o] += w * e;
                }
            }
        }
        out
    }
}

/// Cosine similarity in `[-1, 1]`. Errors on zero vectors or mismatched
/// dimensions.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Sample a support set with exactly `per_class` examples per class:
/// without replacement when the class is large enough, with replacement
/// (fresh ids for duplicates) otherwise.
pub fn sample_support_set(train: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    use std::collections::BTreeMap;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..train.len() {
        by_class.entry(train.class_index(i)).or_default().push(i);
    }
    for c in 0..train.n_classes() {
        if !by_class.contains_key(&c) {
            return Err(Error::invalid(format!("class {c} is empty")));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut used: std::collections::HashSet<String> =
        train.examples().iter().map(|r| r.id.clone()).collect();
    let mut chosen = Vec::new();
    for members in by_class.values() {
        if members.len() >= per_class {
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            let mut take: Vec<usize> = shuffled.into_iter().take(per_class).collect();
            take.sort_unstable();
            for i in take {
                chosen.push(train.examples()[i].clone());
            }
        } else {
            let mut dup_counter: HashMap<String, usize> = HashMap::new();
            for _ in 0..per_class {
                let i = members[rng.gen_range(0..members.len())];
                let source = &train.examples()[i];
                let mut report = source.clone();
                if !used.insert(report.id.clone()) {
                    // already present: mint a duplicate id
                    loop {
                        let n = dup_counter.entry(source.id.clone()).or_insert(0);
                        *n += 1;
                        let candidate = format!("{}#dup{}", source.id, n);
                        if used.insert(candidate.clone()) {
                            report.id = candidate;
                            break;
                        }
                    }
                }
                chosen.push(report);
            }
        }
    }
    Dataset::new(chosen, train.stage(), train.provenance())
}

/// For every anchor in the support set, draw `pairs_per_anchor / 2`
/// positive partners (same class, different example) and the rest negative
/// (different class), all uniform with replacement.
pub fn generate_pairs(support: &Dataset, pairs_per_anchor: usize, seed: u64) -> Result<Vec<PairExample>> {
    use std::collections::BTreeMap;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..support.len() {
        by_class.entry(support.class_index(i)).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::invalid("pair generation needs at least two classes"));
    }
    for (c, members) in &by_class {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {c} has a single example; no positive partner exists"
            )));
        }
    }

    let mut rng = rng_from_seed(seed);
    let n_pos = pairs_per_anchor / 2;
    let n_neg = pairs_per_anchor - n_pos;
    let mut pairs = Vec::with_capacity(support.len() * pairs_per_anchor);
    for anchor in 0..support.len() {
        let class = support.class_index(anchor);
        let same = &by_class[&class];
        let other: Vec<usize> = by_class
            .iter()
            .filter(|(c, _)| **c != class)
            .flat_map(|(_, m)| m.iter().copied())
            .collect();
        let anchor_text = &support.examples()[anchor].text;
        for _ in 0..n_pos {
            let partner = loop {
                let p = same[rng.gen_range(0..same.len())];
                if p != anchor {
                    break p;
                }
            };
            pairs.push(PairExample {
                text_a: anchor_text.clone(),
                text_b: support.examples()[partner].text.clone(),
                target: 1.0,
            });
        }
        for _ in 0..n_neg {
            let partner = other[rng.gen_range(0..other.len())];
            pairs.push(PairExample {
                text_a: anchor_text.clone(),
                text_b: support.examples()[partner].text.clone(),
                target: 0.0,
            });
        }
    }
    Ok(pairs)
}

/// Squared error between the projected cosine similarity and the binary
/// target, with its analytic gradient. Operates on raw embeddings so the
/// finite-difference check can call it directly.
pub fn pair_loss_and_grad(
    head: &ProjectionHead,
    embed_a: &[f64],
    embed_b: &[f64],
    target: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let u = head.project(embed_a);
    let v = head.project(embed_b);
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let cos = dot / (nu * nv);
    let loss = (cos - target) * (cos - target);
    let dloss_dcos = 2.0 * (cos - target);

    let dim_out = head.dim_out();
    let mut dcos_du = vec![0.0f64; dim_out];
    let mut dcos_dv = vec![0.0f64; dim_out];
    for o in 0..dim_out {
        dcos_du[o] = (v[o] - (dot / (nu * nu)) * u[o]) / (nu * nv);
        dcos_dv[o] = (u[o] - (dot / (nv * nv)) * v[o]) / (nu * nv);
    }

    let mut grad_w = vec![vec![0.0f64; dim_out]; head.dim_in()];
    let mut grad_b = vec![0.0f64; dim_out];
    for o in 0..dim_out {
        let du = dloss_dcos * dcos_du[o];
        let dv = dloss_dcos * dcos_dv[o];
        for i in 0..head.dim_in() {
            grad_w[i][o] += du * embed_a[i] + dv * embed_b[i];
        }
        grad_b[o] = du + dv;
    }
    Ok((loss, grad_w, grad_b))
}

/// Loss of one pair under a head, embedding through the provider.
pub fn pair_loss(head: &ProjectionHead, pair: &PairExample, provider: &dyn EmbeddingProvider) -> Result<f64> {
    let embeds = provider.embed_batch(&[&pair.text_a, &pair.text_b])?;
    let (loss, _, _) = pair_loss_and_grad(head, &embeds[0], &embeds[1], pair.target)?;
    Ok(loss)
}

/// Embed every distinct text once.
fn embed_cache<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    provider: &dyn EmbeddingProvider,
) -> Result<HashMap<String, Vec<f64>>> {
    let mut unique: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for t in texts {
        if seen.insert(t) {
            unique.push(t);
        }
    }
    let embeddings = provider.embed_batch(&unique)?;
    Ok(unique
        .into_iter()
        .map(str::to_string)
        .zip(embeddings)
        .collect())
}

/// Stochastic gradient descent on the mean pair loss, one pair at a time,
/// with a seeded shuffle per epoch. Returns the tuned head.
pub fn fine_tune_head(
    head: &ProjectionHead,
    pairs: &[PairExample],
    provider: &dyn EmbeddingProvider,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<ProjectionHead> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to fine-tune on"));
    }
    if lr < 0.0 {
        return Err(Error::invalid("learning rate must be >= 0"));
    }
    let cache = embed_cache(
        pairs
            .iter()
            .flat_map(|p| [p.text_a.as_str(), p.text_b.as_str()]),
        provider,
    )?;
    let mut tuned = head.clone();
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let pair = &pairs[idx];
            let (loss, grad_w, grad_b) = pair_loss_and_grad(
                &tuned,
                &cache[&pair.text_a],
                &cache[&pair.text_b],
                pair.target,
            )?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("pair loss at pair {idx}")));
            }
            if lr == 0.0 {
                continue;
            }
            for (w_row, g_row) in tuned.weights.iter_mut().zip(&grad_w) {
                for (w, g) in w_row.iter_mut().zip(g_row) {
                    *w -= lr * g;
                }
            }
            for (b, g) in tuned.bias.iter_mut().zip(&grad_b) {
                *b -= lr * g;
            }
        }
    }
    Ok(tuned)
}

/// Mean pair loss of a head over a pair set.
pub fn mean_pair_loss(
    head: &ProjectionHead,
    pairs: &[PairExample],
    provider: &dyn EmbeddingProvider,
) -> Result<f64> {
    let cache = embed_cache(
        pairs
            .iter()
            .flat_map(|p| [p.text_a.as_str(), p.text_b.as_str()]),
        provider,
    )?;
    let mut total = 0.0;
    for pair in pairs {
        let (loss, _, _) =
            pair_loss_and_grad(head, &cache[&pair.text_a], &cache[&pair.text_b], pair.target)?;
        total += loss;
    }
    Ok(total / pairs.len() as f64)
}

/// Settings for [`fsbm_fit`].
#[derive(Debug, Clone)]
pub struct FsbmConfig {
    pub per_class: usize,
    pub pairs_per_anchor: usize,
    pub epochs: usize,
    pub lr: f64,
    /// output dimension of the projection head; defaults to the provider dim
    pub head_dim_out: Option<usize>,
    /// classifier fitted on the projected embeddings
    pub classifier: Algorithm,
}

impl Default for FsbmConfig {
    fn default() -> Self {
        FsbmConfig {
            per_class: 200,
            pairs_per_anchor: 20,
            epochs: 10,
            lr: 0.01,
            head_dim_out: None,
            classifier: Algorithm::mlp(),
        }
    }
}

/// A fitted few-shot model: frozen provider, tuned projection head, and a
/// classification head.
pub struct FsbmModel {
    provider: Arc<dyn EmbeddingProvider>,
    head: ProjectionHead,
    classifier: TrainedModel,
}

impl FsbmModel {
    pub fn head(&self) -> &ProjectionHead {
        &self.head
    }

    pub fn classifier(&self) -> &TrainedModel {
        &self.classifier
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }
}

fn dense_to_sparse(values: &[f64]) -> SparseVector {
    SparseVector::new(
        values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect(),
        values.len(),
    )
    .expect("projected embedding entries are finite")
}

/// Train the full few-shot path: support sampling, pair generation, head
/// fine-tuning, then a classifier on all projected training embeddings.
pub fn fsbm_fit(
    train: &Dataset,
    provider: Arc<dyn EmbeddingProvider>,
    config: &FsbmConfig,
    seed: u64,
) -> Result<FsbmModel> {
    if train.n_classes() < 2 {
        return Err(Error::invalid("few-shot training needs at least two classes"));
    }
    let support = sample_support_set(train, config.per_class, derive_seed(seed, &["support"]))?;
    let pairs = generate_pairs(&support, config.pairs_per_anchor, derive_seed(seed, &["pairs"]))?;

    let dim_in = provider.dim();
    let dim_out = config.head_dim_out.unwrap_or(dim_in);
    let head = ProjectionHead::identity(dim_in, dim_out)?;
    let head = fine_tune_head(
        &head,
        &pairs,
        provider.as_ref(),
        config.epochs,
        config.lr,
        derive_seed(seed, &["finetune"]),
    )?;

    let texts: Vec<&str> = train.texts();
    let cache = embed_cache(texts.iter().copied(), provider.as_ref())?;
    let features: Vec<SparseVector> = texts
        .iter()
        .map(|t| dense_to_sparse(&head.project(&cache[*t])))
        .collect();
    let labels = train.class_indices();
    let spec = ClassifierSpec::new(config.classifier.clone(), derive_seed(seed, &["classifier"]));
    let classifier = classifiers::fit(&spec, &features, &labels)?;
    Ok(FsbmModel {
        provider,
        head,
        classifier,
    })
}

/// Classify one text: embed, project, predict.
pub fn fsbm_predict(model: &FsbmModel, text: &str) -> Result<usize> {
    let embedding = model.provider.embed(text)?;
    let projected = model.head.project(&embedding);
    model.classifier.predict(&dense_to_sparse(&projected))
}

/// Classify a batch, embedding distinct texts once.
pub fn fsbm_predict_batch(model: &FsbmModel, texts: &[&str]) -> Result<Vec<usize>> {
    let cache = embed_cache(texts.iter().copied(), model.provider.as_ref())?;
    texts
        .iter()
        .map(|t| {
            let projected = model.head.project(&cache[*t]);
            model.classifier.predict(&dense_to_sparse(&projected))
        })
        .collect()
}
