//! Unigram + bigram vocabulary and smoothed TF-IDF vectors.
//!
//! A bigram is written as its two tokens joined by `_`. Normalized tokens
//! never contain `_`, so bigram terms cannot collide with unigrams.
//!
//! Term weight is `tf * (ln((1 + n) / (1 + df)) + 1)` followed by L2
//! normalization.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::textprep::{preprocess, NormalizationConfig, TokenSequence};

pub const DEFAULT_MIN_DF: u64 = 2;
pub const DEFAULT_MAX_FEATURES: usize = 50_000;

/// Vocabulary size limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyConfig {
    pub min_df: u64,
    pub max_features: Option<usize>,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        VocabularyConfig {
            min_df: DEFAULT_MIN_DF,
            max_features: Some(DEFAULT_MAX_FEATURES),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    document_frequency: Vec<u64>,
    n_documents: u64,
    config: VocabularyConfig,
}

/// Unigrams followed by bigrams, in token order.
pub fn terms(tokens: &TokenSequence) -> impl Iterator<Item = String> + '_ {
    let t = tokens.tokens();
    t.iter()
        .cloned()
        .chain(t.windows(2).map(|w| format!("{}_{}", w[0], w[1])))
}

impl Vocabulary {
    /// Fits on pre-tokenized documents. Retained terms are indexed in
    /// lexicographic (byte) order.
    pub fn fit<'a, I>(docs: I, config: VocabularyConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        if config.min_df == 0 {
            return Err(Error::Config("min_df must be at least 1".into()));
        }
        let mut df: HashMap<String, u64> = HashMap::new();
        let mut n_documents = 0u64;
        for doc in docs {
            n_documents += 1;
            let unique: HashSet<String> = terms(doc).collect();
            for term in unique {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if n_documents == 0 {
            return Err(Error::Empty("cannot fit a vocabulary on zero documents".into()));
        }

        let mut kept: Vec<(String, u64)> = df.into_iter().filter(|(_, d)| *d >= config.min_df).collect();
        if let Some(max) = config.max_features {
            if kept.len() > max {
                kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                kept.truncate(max);
            }
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        let (terms, document_frequency): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        Vocabulary::from_parts(terms, document_frequency, n_documents, config)
    }

    /// Rebuilds a vocabulary from its persisted parts.
    pub fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<u64>,
        n_documents: u64,
        config: VocabularyConfig,
    ) -> Result<Self> {
        if terms.len() != document_frequency.len() {
            return Err(Error::Bundle(format!(
                "vocabulary has {} terms but {} document frequencies",
                terms.len(),
                document_frequency.len()
            )));
        }
        if terms.len() > u32::MAX as usize {
            return Err(Error::Bundle("vocabulary too large".into()));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, term) in terms.iter().enumerate() {
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::Bundle(format!("invalid vocabulary term {term:?}")));
            }
            if index.insert(term.clone(), i as u32).is_some() {
                return Err(Error::Bundle(format!("duplicate vocabulary term {term:?}")));
            }
        }
        Ok(Vocabulary {
            terms,
            index,
            document_frequency,
            n_documents,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self) -> &[u64] {
        &self.document_frequency
    }

    pub fn n_documents(&self) -> u64 {
        self.n_documents
    }

    pub fn config(&self) -> VocabularyConfig {
        self.config
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| i as usize)
    }

    pub fn idf(&self, index: usize) -> f64 {
        idf(self.n_documents, self.document_frequency[index])
    }

    /// TF-IDF vector of a token sequence. Out-of-vocabulary terms are
    /// ignored; a document with no known terms yields the zero vector.
    pub fn vectorize(&self, tokens: &TokenSequence) -> DocumentVector {
        let mut tf: HashMap<u32, u32> = HashMap::new();
        for term in terms(tokens) {
            if let Some(&i) = self.index.get(&term) {
                *tf.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(i, count)| (i, count as f64 * self.idf(i as usize)))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        DocumentVector {
            dim: self.len(),
            entries,
        }
    }

    pub fn vectorize_text(&self, text: &str, config: &NormalizationConfig) -> DocumentVector {
        self.vectorize(&preprocess(text, config))
    }
}

fn idf(n_documents: u64, df: u64) -> f64 {
    ((1.0 + n_documents as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Normalizes and tokenizes every record's text, then fits.
pub fn fit_vocabulary(
    corpus: &Corpus,
    normalization: &NormalizationConfig,
    config: VocabularyConfig,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("cannot fit a vocabulary on an empty corpus".into()));
    }
    let docs: Vec<TokenSequence> = corpus.iter().map(|r| preprocess(&r.text, normalization)).collect();
    Vocabulary::fit(&docs, config)
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl DocumentVector {
    /// Builds a vector from arbitrary entries; they are sorted, and
    /// duplicates or out-of-range indices are rejected.
    pub fn new(dim: usize, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!("duplicate index {} in sparse vector", w[0].0)));
            }
        }
        if let Some(&(i, _)) = entries.iter().find(|e| e.0 as usize >= dim || !e.1.is_finite()) {
            return Err(Error::Config(format!("sparse vector entry {i} out of range or not finite")));
        }
        Ok(DocumentVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        DocumentVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.1 == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i as usize] * v).sum()
    }

    /// Value at `index`, zero when absent.
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(index as u32), |e| e.0)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;

    fn fit(docs: &[&str], min_df: u64, max_features: Option<usize>) -> Vocabulary {
        let docs: Vec<_> = docs.iter().map(|d| tokenize(d)).collect();
        Vocabulary::fit(&docs, VocabularyConfig { min_df, max_features }).unwrap()
    }

    #[test]
    fn unigrams_and_bigrams() {
        let v = fit(&["a b", "a c"], 1, None);
        assert_eq!(v.terms(), ["a", "a_b", "a_c", "b", "c"]);
        assert_eq!(v.len(), 5);
        let v2 = fit(&["a b", "a c"], 2, None);
        assert_eq!(v2.terms(), ["a"]);
    }

    #[test]
    fn max_features_tie_break() {
        let v = fit(&["a b", "a c"], 1, Some(2));
        // a:2 first, then the df=1 terms in byte order: a_b
        assert_eq!(v.terms(), ["a", "a_b"]);
        let unigram_only: Vec<TokenSequence> = vec![tokenize("a"), tokenize("a"), tokenize("b"), tokenize("c")];
        let v = Vocabulary::fit(&unigram_only, VocabularyConfig { min_df: 1, max_features: Some(2) }).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
    }

    #[test]
    fn empty_inputs() {
        let none: Vec<TokenSequence> = Vec::new();
        assert!(matches!(Vocabulary::fit(&none, VocabularyConfig::default()), Err(Error::Empty(_))));
        assert!(fit_vocabulary(&Corpus::default(), &NormalizationConfig::default(), VocabularyConfig::default()).is_err());
    }

    #[test]
    fn single_term_and_oov() {
        let v = fit(&["a b", "a c"], 1, None);
        let x = v.vectorize(&tokenize("c"));
        assert_eq!(x.nnz(), 1);
        assert_eq!(x.entries()[0].1, 1.0);
        let z = v.vectorize(&tokenize("zzz yyy"));
        assert!(z.is_zero());
        assert_eq!(z.dim(), 5);
    }

    /// Scalar recomputation of the weighting formula, term by term.
    #[test]
    fn weights_match_scalar_oracle() {
        let v = fit(&["a a b", "a"], 1, None);
        let x = v.vectorize(&tokenize("a a b"));
        let n = 2.0f64;
        let raw_a = 2.0 * (((1.0 + n) / (1.0 + 2.0)).ln() + 1.0);
        let raw_b = 1.0 * (((1.0 + n) / (1.0 + 1.0)).ln() + 1.0);
        let raw_aa = 1.0 * (((1.0 + n) / (1.0 + 1.0)).ln() + 1.0);
        let raw_ab = raw_aa;
        let norm = (raw_a * raw_a + raw_b * raw_b + raw_aa * raw_aa + raw_ab * raw_ab).sqrt();
        assert!((raw_a - 2.0).abs() < 1e-12);
        assert!((raw_b - 1.405_465_108_108_164_4).abs() < 1e-12);
        let get = |t: &str| x.get(v.index_of(t).unwrap());
        assert!((get("a") - raw_a / norm).abs() < 1e-12);
        assert!((get("b") - raw_b / norm).abs() < 1e-12);
        assert!((get("a_a") - raw_aa / norm).abs() < 1e-12);
        assert!((get("a_b") - raw_ab / norm).abs() < 1e-12);
    }

    /// Unigram-only view of the same document: (2, 1.405) normalizes to
    /// (0.818, 0.575).
    #[test]
    fn unigram_pair_normalization() {
        let v = fit(&["a a b", "a"], 1, None);
        let restricted = Vocabulary::from_parts(
            vec!["a".into(), "b".into()],
            vec![2, 1],
            v.n_documents(),
            v.config(),
        )
        .unwrap();
        let x = restricted.vectorize(&tokenize("a a b"));
        assert!((x.entries()[0].1 - 0.818).abs() < 5e-4);
        assert!((x.entries()[1].1 - 0.575).abs() < 5e-4);
    }

    #[test]
    fn idf_monotone() {
        for df in 1..50u64 {
            assert!(idf(100, df) > idf(100, df + 1));
        }
    }

    proptest::proptest! {
        #[test]
        fn unit_norm(docs in proptest::collection::vec("[abcde]( [abcde]){0,6}", 1..20), probe in "[abcdef]( [abcdef]){0,8}") {
            let v = fit(&docs.iter().map(String::as_str).collect::<Vec<_>>(), 1, None);
            let x = v.vectorize(&tokenize(&probe));
            if !x.is_zero() {
                proptest::prop_assert!((x.norm() - 1.0).abs() < 1e-9);
            }
            proptest::prop_assert!(x.entries().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
