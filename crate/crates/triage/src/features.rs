//! TF-IDF vectorization of token lists into L2-normalized sparse vectors.
//!
//! tf is the raw in-document term count; idf is the smoothed
//! `ln((1 + n_docs) / (1 + doc_freq)) + 1`, so a term present in every
//! document still gets weight 1 and nothing divides by zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{run_pipeline, Lexicon, PipelineConfig, Token};

/// Term index built from a training corpus. Column ids are assigned in
/// first-appearance order so the mapping is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    /// term at each column, inverse of `index`
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.doc_freq[c])
    }

    /// `term<TAB>column<TAB>doc_freq` dump, one line per term in column order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (col, term) in self.terms.iter().enumerate() {
            out.push_str(&format!("{term}\t{col}\t{}\n", self.doc_freq[col]));
        }
        out
    }
}

/// Sparse vector with strictly non-zero entries sorted by column id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(usize, f64)>, dim: usize) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(c, _)| c);
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::invalid(format!(
                    "duplicate column {} in sparse vector",
                    window[0].0
                )));
            }
        }
        if let Some(&(c, _)) = entries.last() {
            if c >= dim {
                return Err(Error::invalid(format!(
                    "column {c} out of range for dim {dim}"
                )));
            }
        }
        for &(_, v) in &entries {
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse vector entry".into()));
            }
        }
        Ok(SparseVector { entries, dim })
    }

    pub fn zero(dim: usize) -> Self {
        SparseVector {
            entries: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries
            .binary_search_by_key(&column, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, va) = self.entries[i];
            let (cb, vb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * dense[c]).sum()
    }

    /// Squared Euclidean distance to another sparse vector.
    pub fn sq_dist(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() || j < other.entries.len() {
            let ca = self.entries.get(i).map(|e| e.0);
            let cb = other.entries.get(j).map(|e| e.0);
            match (ca, cb) {
                (Some(a), Some(b)) if a == b => {
                    let d = self.entries[i].1 - other.entries[j].1;
                    acc += d * d;
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    acc += self.entries[i].1 * self.entries[i].1;
                    i += 1;
                }
                (Some(_), Some(_)) => {
                    acc += other.entries[j].1 * other.entries[j].1;
                    j += 1;
                }
                (Some(_), None) => {
                    acc += self.entries[i].1 * self.entries[i].1;
                    i += 1;
                }
                (None, Some(_)) => {
                    acc += other.entries[j].1 * other.entries[j].1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c] = v;
        }
        out
    }
}

/// Build a vocabulary over tokenized documents, keeping terms whose
/// document frequency is at least `min_df`.
pub fn build_vocabulary(docs: &[Vec<Token>], min_df: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from zero documents"));
    }
    // document frequency in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
        for tok in doc {
            if seen.insert(tok.as_str()) {
                let e = df.entry(tok.as_str().to_string()).or_insert(0);
                if *e == 0 {
                    order.push(tok.as_str().to_string());
                }
                *e += 1;
            }
        }
    }
    let mut index = HashMap::new();
    let mut terms = Vec::new();
    let mut doc_freq = Vec::new();
    for term in order {
        let d = df[&term];
        if d >= min_df {
            index.insert(term.clone(), terms.len());
            terms.push(term);
            doc_freq.push(d);
        }
    }
    Ok(Vocabulary {
        index,
        terms,
        doc_freq,
        n_docs: docs.len(),
    })
}

/// Smoothed inverse document frequency of an indexed term.
pub fn idf(term: &str, vocab: &Vocabulary) -> Result<f64> {
    let col = vocab
        .column(term)
        .ok_or_else(|| Error::invalid(format!("term {term:?} is not indexed")))?;
    Ok(idf_by_column(vocab, col))
}

fn idf_by_column(vocab: &Vocabulary, column: usize) -> f64 {
    ((1.0 + vocab.n_docs as f64) / (1.0 + vocab.doc_freq[column] as f64)).ln() + 1.0
}

/// TF-IDF vector of a document: per-term count times idf, L2-normalized
/// unless every term is out of vocabulary.
pub fn tfidf_vector(doc: &[Token], vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for tok in doc {
        if let Some(col) = vocab.column(tok.as_str()) {
            *counts.entry(col).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(col, count)| (col, count * idf_by_column(vocab, col)))
        .collect();
    entries.sort_unstable_by_key(|&(c, _)| c);
    let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for e in &mut entries {
            e.1 /= norm;
        }
    }
    SparseVector {
        entries,
        dim: vocab.len(),
    }
}

/// Preprocess every report in a dataset and vectorize it. The vocabulary
/// is built from these documents, so call this on the training split and
/// use [`vectorize_with`] for held-out data.
pub fn vectorize_dataset(
    dataset: &Dataset,
    config: &PipelineConfig,
    lexicon: &Lexicon,
) -> Result<(Vec<SparseVector>, Vocabulary)> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot vectorize an empty dataset"));
    }
    let docs: Vec<Vec<Token>> = dataset
        .examples()
        .iter()
        .map(|r| run_pipeline(&r.text, config, lexicon))
        .collect();
    let vocab = build_vocabulary(&docs, 1)?;
    let vectors = docs.iter().map(|d| tfidf_vector(d, &vocab)).collect();
    Ok((vectors, vocab))
}

/// Vectorize a dataset against an existing vocabulary. Out-of-vocabulary
/// terms contribute nothing.
pub fn vectorize_with(
    dataset: &Dataset,
    vocab: &Vocabulary,
    config: &PipelineConfig,
    lexicon: &Lexicon,
) -> Vec<SparseVector> {
    dataset
        .examples()
        .iter()
        .map(|r| tfidf_vector(&run_pipeline(&r.text, config, lexicon), vocab))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w).unwrap()).collect()
    }

    #[test]
    fn vocabulary_counts_by_hand() {
        let docs = vec![doc(&["a", "b"]), doc(&["b", "c"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.n_docs(), 2);
        assert_eq!(v.doc_freq("a"), Some(1));
        assert_eq!(v.doc_freq("b"), Some(2));
        assert_eq!(v.doc_freq("c"), Some(1));
        // first-appearance column order
        assert_eq!(v.column("a"), Some(0));
        assert_eq!(v.column("b"), Some(1));
        assert_eq!(v.column("c"), Some(2));
    }

    #[test]
    fn vocabulary_min_df_filters() {
        let docs = vec![doc(&["a", "b"]), doc(&["b", "c"])];
        let v = build_vocabulary(&docs, 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.column("b"), Some(0));
        assert_eq!(v.column("a"), None);
    }

    #[test]
    fn vocabulary_single_doc() {
        let v = build_vocabulary(&[doc(&["a"])], 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.n_docs(), 1);
    }

    #[test]
    fn vocabulary_rejects_empty_corpus() {
        assert!(build_vocabulary(&[], 1).is_err());
    }

    #[test]
    fn idf_hand_values() {
        let docs = vec![doc(&["x", "y"]), doc(&["x", "z"]), doc(&["x", "y"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        // in every doc: ln(1) + 1
        assert!((idf("x", &v).unwrap() - 1.0).abs() < 1e-12);
        // n=3, df=2: ln(4/3) + 1
        assert!((idf("y", &v).unwrap() - 1.2876820724517809).abs() < 1e-9);
        // n=3, df=1: ln(2) + 1
        assert!((idf("z", &v).unwrap() - 1.6931471805599453).abs() < 1e-9);
        assert!(idf("missing", &v).is_err());
    }

    #[test]
    fn tfidf_hand_computed_document() {
        let docs = vec![
            doc(&["lesion", "lesion", "cortex"]),
            doc(&["lesion", "tooth"]),
            doc(&["tooth", "root"]),
        ];
        let v = build_vocabulary(&docs, 1).unwrap();
        let vec1 = tfidf_vector(&docs[0], &v);
        // raw weights: lesion 2*(ln(4/3)+1), cortex 1*(ln(2)+1); norm then divides
        let lesion = vec1.get(v.column("lesion").unwrap());
        let cortex = vec1.get(v.column("cortex").unwrap());
        assert!((lesion - 0.835591).abs() < 1e-6, "lesion = {lesion}");
        assert!((cortex - 0.549352).abs() < 1e-6, "cortex = {cortex}");
        assert!((vec1.l2_norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn tfidf_out_of_vocabulary_only_is_zero() {
        let docs = vec![doc(&["a"]), doc(&["b"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        let z = tfidf_vector(&doc(&["zz", "qq"]), &v);
        assert_eq!(z.nnz(), 0);
        assert_eq!(z.dim(), 2);
        assert_eq!(z.l2_norm(), 0.0);
    }

    #[test]
    fn sparse_vector_ops() {
        let a = SparseVector::new(vec![(0, 1.0), (2, 2.0)], 4).unwrap();
        let b = SparseVector::new(vec![(2, 3.0), (3, 1.0)], 4).unwrap();
        assert_eq!(a.dot(&b), 6.0);
        assert_eq!(a.sq_dist(&b), 1.0 + 1.0 + 1.0);
        assert_eq!(a.to_dense(), vec![1.0, 0.0, 2.0, 0.0]);
        assert!(SparseVector::new(vec![(5, 1.0)], 4).is_err());
        assert!(SparseVector::new(vec![(0, 1.0), (0, 2.0)], 4).is_err());
    }
}
