//! Shared fixtures, generators and independent oracles for the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use histner::corpus::{iob_from_spans, Dataset, Document, EntitySpan, IobTag, Split};
use histner::runner::{DatasetConfig, ExperimentConfig, LoadedDataset, ProviderSection};
use histner::retrieval::EmbeddingTable;
use histner::prompting::Method;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub const LABELS: [&str; 3] = ["PER", "LOC", "ORG"];

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The mini HIPE corpus: train, dev and test files plus embeddings.
pub fn mini_dataset_config() -> DatasetConfig {
    DatasetConfig {
        id: "mini".into(),
        language: Some("en".into()),
        train: Some(fixture("hipe/mini-train.tsv")),
        dev: Some(fixture("hipe/mini-dev.tsv")),
        test: Some(fixture("hipe/mini-test.tsv")),
        embeddings: Some(fixture("hipe/mini-embeddings.txt")),
        ..Default::default()
    }
}

pub fn experiment(output_dir: &Path, methods: Vec<Method>, runs: u32) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: output_dir.to_path_buf(),
        methods,
        runs,
        seed: 7,
        target_split: Default::default(),
        workers: 3,
        max_example_chars: None,
        confidence: 0.95,
        provider: ProviderSection::default(),
        datasets: vec![mini_dataset_config()],
    }
}

pub fn loaded(dataset: Dataset, embeddings: Option<EmbeddingTable>) -> LoadedDataset {
    LoadedDataset {
        dataset,
        embeddings,
        extra_stopwords: None,
    }
}

/// Random non-overlapping spans over `len` tokens.
pub fn random_spans(rng: &mut impl Rng, len: usize) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < len {
        if rng.gen_bool(0.35) {
            let max = (len - i).min(4);
            let n = rng.gen_range(1..=max);
            let label = LABELS[rng.gen_range(0..LABELS.len())];
            spans.push(EntitySpan::new(i, i + n, label));
            i += n;
        } else {
            i += 1;
        }
    }
    spans
}

pub fn random_tags(rng: &mut impl Rng, len: usize) -> Vec<IobTag> {
    let spans = random_spans(rng, len);
    iob_from_spans(&spans, len).unwrap()
}

/// Documents whose entity tokens never occur outside entities, so the
/// leftmost-free-occurrence aligner must recover the gold exactly.
pub fn random_dataset(rng: &mut impl Rng, id: &str, docs: usize) -> Dataset {
    const PLAIN: [&str; 8] = ["the", "a", "went", "to", "and", "from", "said", "."];
    const NAMES: [&str; 8] = ["Anna", "Berg", "Wien", "Otto", "Rhein", "Klee", "Mainz", "Zeiss"];
    let documents = (0..docs)
        .map(|d| {
            let len = rng.gen_range(1..25);
            let spans = random_spans(rng, len);
            let mut surfaces: Vec<&str> = (0..len).map(|_| *PLAIN.choose(rng).unwrap()).collect();
            for s in &spans {
                for tok in surfaces.iter_mut().take(s.end).skip(s.start) {
                    *tok = NAMES.choose(rng).unwrap();
                }
            }
            let mut doc = Document::from_surfaces(format!("{id}-{d:03}"), &surfaces, spans);
            doc.split = if d % 4 == 3 { Split::Dev } else { Split::Train };
            doc
        })
        .collect();
    Dataset::new(id, "en", documents, Some(LABELS.iter().map(|s| s.to_string()).collect())).unwrap()
}

// ---------------------------------------------------------------------
// Independent lexical-overlap oracle
// ---------------------------------------------------------------------

fn is_punct(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| c.is_ascii_punctuation())
}

/// Brute-force TF-IDF filter and pairwise overlap score over raw token
/// lists, with no stop words and ASCII punctuation removed.
pub struct OverlapOracle {
    /// doc -> term -> (tf, tfidf) for kept terms
    kept: BTreeMap<String, BTreeMap<String, (usize, f64)>>,
    kept_count: BTreeMap<String, usize>,
}

pub fn numpy_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

impl OverlapOracle {
    pub fn new(docs: &[(String, Vec<String>)]) -> Self {
        let n = docs.len() as f64;
        let mut tfs: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for (id, toks) in docs {
            let mut tf = BTreeMap::new();
            for t in toks.iter().filter(|t| !is_punct(t)) {
                *tf.entry(t.to_lowercase()).or_insert(0) += 1;
            }
            for term in tf.keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
            tfs.insert(id.clone(), tf);
        }
        let weight = |term: &str, tf: usize| tf as f64 * (n / df[term] as f64).ln();
        let all: Vec<f64> = tfs
            .values()
            .flat_map(|tf| tf.iter().map(|(t, c)| weight(t, *c)))
            .collect();
        let threshold = if all.is_empty() { 0.0 } else { numpy_percentile(&all, 0.10) };
        let mut kept = BTreeMap::new();
        let mut kept_count = BTreeMap::new();
        for (id, tf) in &tfs {
            let k: BTreeMap<String, (usize, f64)> = tf
                .iter()
                .map(|(t, c)| (t.clone(), (*c, weight(t, *c))))
                .filter(|(_, (_, w))| *w >= threshold)
                .collect();
            kept_count.insert(id.clone(), k.values().map(|(c, _)| c).sum());
            kept.insert(id.clone(), k);
        }
        Self { kept, kept_count }
    }

    pub fn score(&self, a: &str, b: &str) -> f64 {
        let (ka, kb) = (&self.kept[a], &self.kept[b]);
        let (na, nb) = (self.kept_count[a], self.kept_count[b]);
        if na == 0 || nb == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for (term, (tfa, wa)) in ka {
            if let Some((tfb, wb)) = kb.get(term) {
                s += (wa + wb) * (*tfa as f64 / na as f64 + *tfb as f64 / nb as f64);
            }
        }
        s
    }

    pub fn is_empty(&self, id: &str) -> bool {
        self.kept_count[id] == 0
    }

    /// Every candidate scored, sorted by (empty last, score desc, id asc).
    pub fn rank(&self, target: &str, candidates: &[&str], k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<(bool, String, f64)> = candidates
            .iter()
            .filter(|c| **c != target)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|c| (self.is_empty(c), c.to_string(), self.score(target, c)))
            .collect();
        all.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(b.2.partial_cmp(&a.2).unwrap())
                .then(a.1.cmp(&b.1))
        });
        all.into_iter().take(k).map(|(_, id, s)| (id, s)).collect()
    }
}

/// Brute-force cosine ranking; zero vectors rank last.
pub fn embedding_oracle(
    target: &[f64],
    candidates: &[(String, Vec<f64>)],
    k: usize,
) -> Vec<(String, f64)> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tn = norm(target);
    let mut all: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, v)| {
            let cn = norm(v);
            let s = if tn == 0.0 || cn == 0.0 {
                f64::NEG_INFINITY
            } else {
                let dot: f64 = target.iter().zip(v).map(|(a, b)| a * b).sum();
                (dot / (tn * cn)).clamp(-1.0, 1.0)
            };
            (id.clone(), s)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

// ---------------------------------------------------------------------
// Optimal fuzzy matching oracle
// ---------------------------------------------------------------------

/// Maximum number of disjoint (gold, pred) pairs with equal labels and
/// overlapping boundaries, by exhaustive search.
pub fn optimal_fuzzy_tp(pred: &[EntitySpan], gold: &[EntitySpan]) -> usize {
    fn go(g: usize, gold: &[EntitySpan], pred: &[EntitySpan], used: &mut Vec<bool>) -> usize {
        if g == gold.len() {
            return 0;
        }
        let mut best = go(g + 1, gold, pred, used);
        for (j, p) in pred.iter().enumerate() {
            if !used[j] && p.label == gold[g].label && p.start < gold[g].end && gold[g].start < p.end {
                used[j] = true;
                best = best.max(1 + go(g + 1, gold, pred, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, gold, pred, &mut vec![false; pred.len()])
}

/// Hand-rolled strict-majority vote with ties to O, then dangling I-X
/// turned into B-X.
pub fn vote_oracle(runs: &[Vec<IobTag>]) -> Vec<IobTag> {
    let n = runs.len();
    let len = runs[0].len();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in runs {
            *counts.entry(r[i].to_string()).or_insert(0) += 1;
        }
        let winner = counts
            .into_iter()
            .find(|(_, c)| 2 * c > n)
            .map(|(t, _)| t)
            .unwrap_or_else(|| "O".to_string());
        out.push(winner.parse::<IobTag>().unwrap());
    }
    for i in 0..len {
        if let IobTag::Inside(l) = &out[i] {
            let continues = i > 0
                && matches!(&out[i - 1], IobTag::Begin(p) | IobTag::Inside(p) if p == l);
            if !continues {
                out[i] = IobTag::Begin(l.clone());
            }
        }
    }
    out
}
