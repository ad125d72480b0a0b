//! TF-IDF statistics, the corpus-wide bottom-decile token filter and the
//! weighted lexical overlap score between two filtered documents.
//!
//! Terms are lowercased token surfaces. Stop words (for the document's
//! language) and punctuation-only tokens never enter the model.
//! `tfidf(d, t) = count(t in d) * ln(N / df(t))`.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use super::stopwords::{is_punctuation, StopWords};
use super::RetrievalError;
use crate::corpus::Document;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// Fraction of the corpus-wide tf-idf distribution removed by the filter.
pub const FILTER_QUANTILE: f64 = 0.10;

#[derive(Debug, Clone)]
pub struct TfIdfModel {
    id: u64,
    doc_count: usize,
    document_frequency: HashMap<String, usize>,
    counts: HashMap<String, BTreeMap<String, usize>>,
    tfidf: HashMap<String, BTreeMap<String, f64>>,
    scope: Vec<String>,
    threshold: f64,
}

/// Normalized term for a token, or `None` when the token is filtered out.
pub fn term_of(surface: &str, language: &str, stopwords: &StopWords) -> Option<String> {
    if is_punctuation(surface) {
        return None;
    }
    let term = surface.to_lowercase();
    if stopwords.contains(language, &term) {
        return None;
    }
    Some(term)
}

impl TfIdfModel {
    pub fn build<'a, I>(corpus: I, stopwords: &StopWords) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut counts: HashMap<String, BTreeMap<String, usize>> = HashMap::new();
        let mut scope = Vec::new();
        for doc in corpus {
            if !stopwords.has_language(&doc.language) {
                return Err(RetrievalError::NoStopwords(doc.language.clone()));
            }
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for surface in doc.surfaces() {
                if let Some(term) = term_of(surface, &doc.language, stopwords) {
                    *tf.entry(term).or_default() += 1;
                }
            }
            if counts.insert(doc.doc_id.clone(), tf).is_some() {
                return Err(RetrievalError::DuplicateDocument(doc.doc_id.clone()));
            }
            scope.push(doc.doc_id.clone());
        }
        if scope.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let doc_count = scope.len();
        let mut document_frequency: HashMap<String, usize> = HashMap::new();
        for tf in counts.values() {
            for term in tf.keys() {
                *document_frequency.entry(term.clone()).or_default() += 1;
            }
        }
        let n = doc_count as f64;
        let tfidf: HashMap<String, BTreeMap<String, f64>> = counts
            .iter()
            .map(|(doc_id, tf)| {
                let scores = tf
                    .iter()
                    .map(|(term, &c)| {
                        let idf = (n / document_frequency[term] as f64).ln();
                        (term.clone(), c as f64 * idf)
                    })
                    .collect();
                (doc_id.clone(), scores)
            })
            .collect();

        let mut all: Vec<f64> = scope
            .iter()
            .flat_map(|id| tfidf[id].values().copied())
            .collect();
        let threshold = quantile_linear(&mut all, FILTER_QUANTILE).unwrap_or(0.0);

        Ok(Self {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            doc_count,
            document_frequency,
            counts,
            tfidf,
            scope,
            threshold,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.document_frequency.get(term).copied().unwrap_or(0)
    }

    pub fn scope(&self) -> &[String] {
        &self.scope
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.tfidf.contains_key(doc_id)
    }

    pub fn tfidf(&self, doc_id: &str, term: &str) -> Option<f64> {
        self.tfidf.get(doc_id)?.get(term).copied()
    }

    /// Global filter threshold: the 10th percentile of every (document,
    /// term) tf-idf value in scope.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Drops this document's terms scoring strictly below the global
    /// threshold; ties are kept.
    pub fn filter_bottom_decile(&self, doc_id: &str) -> Result<FilteredDoc, RetrievalError> {
        let counts = self
            .counts
            .get(doc_id)
            .ok_or_else(|| RetrievalError::NotInScope(doc_id.to_string()))?;
        let scores = &self.tfidf[doc_id];
        let mut term_frequency = BTreeMap::new();
        let mut tfidf = BTreeMap::new();
        for (term, &c) in counts {
            let s = scores[term];
            if s >= self.threshold {
                term_frequency.insert(term.clone(), c);
                tfidf.insert(term.clone(), s);
            }
        }
        let kept_count = term_frequency.values().sum();
        Ok(FilteredDoc {
            model_id: self.id,
            doc_id: doc_id.to_string(),
            term_frequency,
            tfidf,
            kept_count,
        })
    }
}

/// Linear-interpolation quantile (numpy's default). Sorts `values`.
pub fn quantile_linear(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(values[lo] + (values[hi] - values[lo]) * frac)
}

/// Terms of one document surviving the filter, with their counts and
/// tf-idf scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDoc {
    model_id: u64,
    pub doc_id: String,
    pub term_frequency: BTreeMap<String, usize>,
    pub tfidf: BTreeMap<String, f64>,
    pub kept_count: usize,
}

impl FilteredDoc {
    pub fn is_empty(&self) -> bool {
        self.kept_count == 0
    }

    /// The kept multiset, expanded in term order.
    pub fn kept_tokens(&self) -> impl Iterator<Item = &str> {
        self.term_frequency
            .iter()
            .flat_map(|(t, &c)| std::iter::repeat_n(t.as_str(), c))
    }
}

/// Weighted overlap between two filtered documents:
/// `sum over shared t of (w_a(t) + w_b(t)) * (tf_a(t)/|a| + tf_b(t)/|b|)`.
pub fn overlap_score(a: &FilteredDoc, b: &FilteredDoc) -> Result<f64, RetrievalError> {
    if a.model_id != b.model_id {
        return Err(RetrievalError::ModelMismatch);
    }
    if a.kept_count == 0 || b.kept_count == 0 {
        return Ok(0.0);
    }
    let (na, nb) = (a.kept_count as f64, b.kept_count as f64);
    // iterate the smaller map, but accumulate in term order either way
    let (small, large) = if a.term_frequency.len() <= b.term_frequency.len() {
        (a, b)
    } else {
        (b, a)
    };
    let mut shared: Vec<&str> = small
        .term_frequency
        .keys()
        .filter(|t| large.term_frequency.contains_key(*t))
        .map(String::as_str)
        .collect();
    shared.sort_unstable();
    let mut score = 0.0;
    for t in shared {
        let weight = a.tfidf[t] + b.tfidf[t];
        let freq = a.term_frequency[t] as f64 / na + b.term_frequency[t] as f64 / nb;
        score += weight * freq;
    }
    Ok(score)
}
