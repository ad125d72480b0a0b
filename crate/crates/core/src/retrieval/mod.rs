//! In-context example selection: random, lexical overlap, and embedding
//! cosine similarity.
//!
//! All rankers drop the target from the candidate list, remove duplicate
//! candidates and order ties by doc id ascending.

pub mod embedding;
pub mod stopwords;
pub mod tfidf;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Dataset, Document};
pub use embedding::{cosine, EmbeddingTable};
pub use stopwords::StopWords;
pub use tfidf::{overlap_score, FilteredDoc, TfIdfModel};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build a tf-idf model from an empty corpus")]
    EmptyCorpus,
    #[error("no stop-word list for language {0:?}")]
    NoStopwords(String),
    #[error("document {0:?} appears twice in the corpus")]
    DuplicateDocument(String),
    #[error("document {0:?} is not in the model's scope")]
    NotInScope(String),
    #[error("filtered documents come from different tf-idf models")]
    ModelMismatch,
    #[error("no candidates left for target {0:?}")]
    NoCandidates(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no embedding vector for {0:?}")]
    MissingVector(String),
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    pub candidate_id: String,
    pub score: f64,
}

/// Train and dev documents, minus the target itself.
pub fn candidate_pool<'a>(dataset: &'a Dataset, target_id: &str) -> Vec<&'a str> {
    dataset
        .documents
        .iter()
        .filter(|d| d.split.is_candidate_pool() && d.doc_id != target_id)
        .map(|d| d.doc_id.as_str())
        .collect()
}

fn prepare<'a>(target: &str, candidates: &[&'a str], k: usize) -> Result<Vec<&'a str>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let mut seen = HashSet::new();
    let pool: Vec<&str> = candidates
        .iter()
        .copied()
        .filter(|c| *c != target && seen.insert(*c))
        .collect();
    if pool.is_empty() {
        return Err(RetrievalError::NoCandidates(target.to_string()));
    }
    Ok(pool)
}

fn by_score_then_id(a: &SimilarityResult, b: &SimilarityResult) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.candidate_id.cmp(&b.candidate_id))
}

/// TF-IDF model plus the filtered view of every in-scope document.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    model: TfIdfModel,
    filtered: HashMap<String, FilteredDoc>,
}

impl LexicalIndex {
    pub fn build<'a, I>(corpus: I, stopwords: &StopWords) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let model = TfIdfModel::build(corpus, stopwords)?;
        let filtered = model
            .scope()
            .iter()
            .map(|id| Ok((id.clone(), model.filter_bottom_decile(id)?)))
            .collect::<Result<_, RetrievalError>>()?;
        Ok(Self { model, filtered })
    }

    pub fn model(&self) -> &TfIdfModel {
        &self.model
    }

    pub fn filtered(&self, doc_id: &str) -> Result<&FilteredDoc, RetrievalError> {
        self.filtered
            .get(doc_id)
            .ok_or_else(|| RetrievalError::NotInScope(doc_id.to_string()))
    }

    pub fn score(&self, a: &str, b: &str) -> Result<f64, RetrievalError> {
        overlap_score(self.filtered(a)?, self.filtered(b)?)
    }

    /// Top-`k` candidates by overlap score. Candidates whose filtered
    /// token multiset is empty rank after every non-empty candidate.
    pub fn rank_lexical(
        &self,
        target: &str,
        candidates: &[&str],
        k: usize,
    ) -> Result<Vec<SimilarityResult>, RetrievalError> {
        let pool = prepare(target, candidates, k)?;
        let t = self.filtered(target)?;
        let mut scored = pool
            .into_iter()
            .map(|c| {
                let f = self.filtered(c)?;
                Ok((
                    f.is_empty(),
                    SimilarityResult {
                        candidate_id: c.to_string(),
                        score: overlap_score(t, f)?,
                    },
                ))
            })
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        scored.sort_by(|(ea, a), (eb, b)| ea.cmp(eb).then_with(|| by_score_then_id(a, b)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(_, r)| r).collect())
    }
}

/// Top-`k` candidates by cosine similarity to the target's vector. A zero
/// vector on either side scores negative infinity.
pub fn rank_embedding(
    target: &str,
    candidates: &[&str],
    k: usize,
    table: &EmbeddingTable,
) -> Result<Vec<SimilarityResult>, RetrievalError> {
    let pool = prepare(target, candidates, k)?;
    let tv = table
        .get(target)
        .ok_or_else(|| RetrievalError::MissingVector(target.to_string()))?;
    let mut scored = pool
        .into_iter()
        .map(|c| {
            let cv = table
                .get(c)
                .ok_or_else(|| RetrievalError::MissingVector(c.to_string()))?;
            let score = cosine(tv, cv).unwrap_or_else(|| {
                log::warn!("zero embedding vector in pair ({target}, {c}); ranked last");
                f64::NEG_INFINITY
            });
            Ok(SimilarityResult {
                candidate_id: c.to_string(),
                score,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(by_score_then_id);
    scored.truncate(k);
    Ok(scored)
}

fn keyed_rng(seed: u64, run_index: u32, target: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(run_index.to_le_bytes());
    h.update(target.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// `k` distinct candidates drawn uniformly without replacement. Each
/// candidate (in doc id order) gets a uniform key from a ChaCha8 stream
/// seeded by `(seed, run_index, target)`; the `k` largest keys win.
pub fn rank_random(
    target: &str,
    candidates: &[&str],
    k: usize,
    seed: u64,
    run_index: u32,
) -> Result<Vec<SimilarityResult>, RetrievalError> {
    let mut pool = prepare(target, candidates, k)?;
    pool.sort_unstable();
    let mut rng = keyed_rng(seed, run_index, target);
    let mut keyed: Vec<SimilarityResult> = pool
        .into_iter()
        .map(|c| SimilarityResult {
            candidate_id: c.to_string(),
            score: rng.gen::<f64>(),
        })
        .collect();
    keyed.sort_by(by_score_then_id);
    keyed.truncate(k);
    Ok(keyed)
}
