//! TF-IDF vectors with sub-linear term frequency and smoothed idf:
//!
//! * `tf(t, d) = 1 + ln(count(t, d))` for `count > 0`
//! * `idf(t) = ln((1 + N) / (1 + df(t))) + 1`
//!
//! Document vectors are L2-normalized, so cosine similarity is a dot product.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, CorpusError};
use super::tokenize::tokenize;

/// Sparse vector as `(term index, weight)` pairs sorted by term index.
pub type SparseVector = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_vectors: Vec<SparseVector>,
}

pub fn term_frequency(count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        1.0 + libm::log(count as f64)
    }
}

pub fn inverse_document_frequency(n_docs: usize, doc_freq: usize) -> f64 {
    libm::log((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)) + 1.0
}

fn counts(text: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

fn normalize(v: &mut SparseVector) {
    let norm = libm::sqrt(v.iter().map(|(_, w)| w * w).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|(_, w)| *w /= norm);
    }
}

impl TfIdfModel {
    pub fn build(corpus: &Corpus) -> Result<Self, CorpusError> {
        if corpus.is_empty() {
            return Err(CorpusError::Empty);
        }
        let per_doc: Vec<BTreeMap<String, usize>> =
            corpus.docs().iter().map(|d| counts(&d.body)).collect();
        let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in &per_doc {
            for term in doc.keys() {
                *doc_freq.entry(term.as_str()).or_insert(0) += 1;
            }
        }
        let vocabulary: BTreeMap<String, usize> = doc_freq
            .keys()
            .enumerate()
            .map(|(i, t)| (String::from(*t), i))
            .collect();
        let n = corpus.len();
        let idf: Vec<f64> = doc_freq
            .values()
            .map(|&df| inverse_document_frequency(n, df))
            .collect();
        let doc_vectors = per_doc
            .iter()
            .map(|doc| {
                // BTreeMap iteration is sorted, and vocabulary indices follow the same order.
                let mut v: SparseVector = doc
                    .iter()
                    .map(|(term, &c)| {
                        let idx = vocabulary[term];
                        (idx, term_frequency(c) * idf[idx])
                    })
                    .collect();
                normalize(&mut v);
                v
            })
            .collect();
        let doc_ids = corpus.docs().iter().map(|d| d.doc_id.clone()).collect();
        Ok(Self {
            vocabulary,
            idf,
            doc_ids,
            doc_vectors,
        })
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_vectors(&self) -> &[SparseVector] {
        &self.doc_vectors
    }

    /// Weight of `term` in document `doc`, 0 if absent.
    pub fn weight(&self, doc: usize, term: &str) -> f64 {
        let Some(&idx) = self.vocabulary.get(term) else {
            return 0.0;
        };
        let v = &self.doc_vectors[doc];
        v.binary_search_by_key(&idx, |(i, _)| *i)
            .map_or(0.0, |pos| v[pos].1)
    }

    /// Normalized query vector over in-vocabulary tokens; empty if none.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut v: SparseVector = counts(text)
            .into_iter()
            .filter_map(|(term, c)| {
                self.vocabulary
                    .get(&term)
                    .map(|&idx| (idx, term_frequency(c) * self.idf[idx]))
            })
            .collect();
        v.sort_unstable_by_key(|(i, _)| *i);
        normalize(&mut v);
        v
    }

    /// Top `k` documents by cosine similarity to `query`, best first, ties by
    /// ascending doc id. Documents sharing no term with the query are left out.
    pub fn rank(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let q = self.vectorize(query);
        if q.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut hits: Vec<(&String, f64)> = self
            .doc_vectors
            .iter()
            .zip(&self.doc_ids)
            .filter_map(|(doc, id)| {
                let score = sparse_dot(&q, doc);
                (score > 0.0).then(|| (id, score.min(1.0)))
            })
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        hits.into_iter()
            .take(k)
            .map(|(id, s)| (id.clone(), s))
            .collect()
    }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// Convenience wrapper over [`TfIdfModel::build`].
pub fn build_tfidf(corpus: &Corpus) -> Result<TfIdfModel, CorpusError> {
    TfIdfModel::build(corpus)
}

/// Convenience wrapper over [`TfIdfModel::rank`].
pub fn cosine_rank(query: &str, model: &TfIdfModel, k: usize) -> Vec<(String, f64)> {
    model.rank(query, k)
}
