//! The method × run × document matrix.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, ExperimentConfig, ProviderKind};
use super::{
    export_tables, score_predictions, write_jsonl, DocStatus, ExampleRef, PredictionRecord, RunnerError,
};
use crate::corpus::{
    iob_from_spans, load_json, parse_dataset, spans_from_iob, Dataset, Document, EntitySpan, ParseOptions,
    DEFAULT_TAG_COLUMN,
};
use crate::llm_gateway::{load_script, ExchangeStore, Gateway, HttpProvider, MockMode, MockProvider, Provider, RequestMeta};
use crate::prompting::{Method, PromptRenderer};
use crate::response::{align, parse_reply};
use crate::retrieval::{
    candidate_pool, rank_embedding, rank_random, EmbeddingTable, LexicalIndex, SimilarityResult, StopWords,
};
use crate::scoring::{RunLabel, ScoreReport};
use crate::voting::{majority_vote, RunTags};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const MIN_RUNS_FOR_VOTE: u32 = 3;

pub struct LoadedDataset {
    pub dataset: Dataset,
    pub embeddings: Option<EmbeddingTable>,
    /// Extra stop-word list text for the dataset language.
    pub extra_stopwords: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub language: String,
    pub labels: Vec<String>,
    pub documents: usize,
    pub targets: usize,
    pub parse_warnings: usize,
}

/// Status of one (method, run, document) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset_id: String,
    pub method: Method,
    pub run: u32,
    pub doc_id: String,
    pub status: DocStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub started_at: String,
    pub wall_clock_secs: f64,
    pub provider_calls: u64,
    pub cache_hits: u64,
    pub failed: usize,
    /// How random example draws relate across runs.
    pub random_selection: String,
    pub datasets: Vec<DatasetSummary>,
    pub entries: Vec<ManifestEntry>,
    pub artifacts: BTreeMap<String, PathBuf>,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub reports: Vec<ScoreReport>,
    pub predictions: Vec<PredictionRecord>,
}

/// Parses the split files (or the JSON dump) of one configured dataset.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset, RunnerError> {
    if let Some(dump) = &cfg.dump {
        let text = std::fs::read_to_string(dump).map_err(|e| RunnerError::io(dump, e))?;
        let ds = load_json(&text)?;
        if ds.dataset_id != cfg.id {
            return Err(RunnerError::Dataset(format!(
                "dump {} holds dataset {:?}, configured as {:?}",
                dump.display(),
                ds.dataset_id,
                cfg.id
            )));
        }
        return Ok(ds);
    }
    let mut parts = Vec::new();
    for (split, path) in cfg.split_files() {
        let opts = ParseOptions {
            column: cfg.column.clone().unwrap_or_else(|| DEFAULT_TAG_COLUMN.to_string()),
            dataset_id: Some(cfg.id.clone()),
            language: cfg.language.clone(),
            split,
            strict: cfg.strict,
        };
        let ds = parse_dataset(path, &opts)?;
        for w in &ds.warnings {
            log::warn!("{}: {w}", path.display());
        }
        parts.push(ds);
    }
    Ok(Dataset::merge(parts, cfg.labels.clone())?)
}

pub fn load_datasets(config: &ExperimentConfig) -> Result<Vec<LoadedDataset>, RunnerError> {
    config
        .datasets
        .iter()
        .map(|cfg| {
            let dataset = load_dataset(cfg)?;
            let embeddings = cfg.embeddings.as_deref().map(EmbeddingTable::read).transpose()?;
            let extra_stopwords = cfg
                .stopwords
                .as_deref()
                .map(|p| std::fs::read_to_string(p).map_err(|e| RunnerError::io(p, e)))
                .transpose()?;
            Ok(LoadedDataset {
                dataset,
                embeddings,
                extra_stopwords,
            })
        })
        .collect()
}

pub fn build_provider(config: &ExperimentConfig, datasets: &[LoadedDataset]) -> Result<Box<dyn Provider>, RunnerError> {
    let section = &config.provider;
    Ok(match section.kind {
        ProviderKind::Http => {
            let pc = section.provider_config();
            if let Some(var) = &pc.api_key_env {
                if std::env::var(var).map(|v| v.is_empty()).unwrap_or(true) {
                    log::warn!("environment variable {var} is not set; sending requests without an API key");
                }
            }
            Box::new(HttpProvider::from_config(&pc))
        }
        ProviderKind::Mock => {
            let sets = datasets.iter().map(|d| &d.dataset);
            match section.mock_mode() {
                MockMode::GoldEcho => Box::new(MockProvider::gold_echo(sets)),
                MockMode::Corrupt => Box::new(MockProvider::corrupt(sets)),
                MockMode::Scripted => {
                    let path = section
                        .script
                        .as_deref()
                        .ok_or_else(|| RunnerError::Config("scripted mock provider needs a script file".into()))?;
                    Box::new(MockProvider::scripted(load_script(path)?))
                }
            }
        }
    })
}

/// Loads datasets, builds the configured provider and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, RunnerError> {
    config.validate()?;
    let datasets = load_datasets(config)?;
    let provider = build_provider(config, &datasets)?;
    run_with_provider(config, &datasets, provider)
}

struct Prepared<'a> {
    dataset: &'a Dataset,
    by_id: HashMap<&'a str, &'a Document>,
    targets: Vec<&'a Document>,
    pools: HashMap<&'a str, Vec<&'a str>>,
    index: Option<LexicalIndex>,
    embeddings: Option<&'a EmbeddingTable>,
}

fn prepare<'a>(
    loaded: &'a LoadedDataset,
    config: &ExperimentConfig,
    stopwords: &StopWords,
) -> Result<Prepared<'a>, RunnerError> {
    let dataset = &loaded.dataset;
    let splits = config.target_split.splits();
    let mut targets: Vec<&Document> = dataset.split(splits).collect();
    targets.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if targets.is_empty() {
        return Err(RunnerError::Dataset(format!(
            "dataset {:?} has no {} documents",
            dataset.dataset_id, config.target_split
        )));
    }
    let pools: HashMap<&str, Vec<&str>> = targets
        .iter()
        .map(|t| (t.doc_id.as_str(), candidate_pool(dataset, &t.doc_id)))
        .collect();
    let in_scope = |d: &Document| d.split.is_candidate_pool() || splits.contains(&d.split);

    let index = if config.methods.iter().any(|m| matches!(m, Method::Overlap(_))) {
        Some(LexicalIndex::build(
            dataset.documents.iter().filter(|d| in_scope(d)),
            stopwords,
        )?)
    } else {
        None
    };

    let embeddings = if config.methods.iter().any(|m| matches!(m, Method::Embedding(_))) {
        let table = loaded.embeddings.as_ref().ok_or_else(|| {
            RunnerError::Config(format!(
                "dataset {:?}: embedding methods need an embeddings table",
                dataset.dataset_id
            ))
        })?;
        let missing: Vec<&str> = dataset
            .documents
            .iter()
            .filter(|d| in_scope(d) && !table.contains(&d.doc_id))
            .map(|d| d.doc_id.as_str())
            .collect();
        if let Some(first) = missing.first() {
            return Err(RunnerError::Config(format!(
                "dataset {:?}: embeddings table lacks {} document(s), first {first:?}",
                dataset.dataset_id,
                missing.len()
            )));
        }
        Some(table)
    } else {
        None
    };

    Ok(Prepared {
        dataset,
        by_id: dataset.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect(),
        targets,
        pools,
        index,
        embeddings,
    })
}

struct Job<'p, 'a> {
    prep: &'p Prepared<'a>,
    method: Method,
    run: u32,
    target: &'a Document,
}

fn select(job: &Job<'_, '_>, seed: u64) -> Result<Vec<SimilarityResult>, String> {
    let pool = &job.prep.pools[job.target.doc_id.as_str()];
    let id = job.target.doc_id.as_str();
    let r = match job.method {
        Method::Baseline => return Ok(Vec::new()),
        Method::Random(k) => rank_random(id, pool, k, seed, job.run),
        Method::Overlap(k) => job
            .prep
            .index
            .as_ref()
            .expect("lexical index built for overlap methods")
            .rank_lexical(id, pool, k),
        Method::Embedding(k) => rank_embedding(
            id,
            pool,
            k,
            job.prep.embeddings.expect("embeddings checked for embedding methods"),
        ),
    };
    r.map_err(|e| format!("example selection: {e}"))
}

fn execute(job: &Job<'_, '_>, config: &ExperimentConfig, gateway: &Gateway, renderer: &PromptRenderer) -> PredictionRecord {
    let dataset = job.prep.dataset;
    let mut record = PredictionRecord {
        dataset_id: dataset.dataset_id.clone(),
        method: job.method,
        run: RunLabel::Run(job.run),
        doc_id: job.target.doc_id.clone(),
        status: DocStatus::Failed,
        reason: None,
        prompt_fingerprint: None,
        examples: Vec::new(),
        spans: Vec::new(),
        dropped: Vec::new(),
        warnings: Vec::new(),
    };
    let outcome = (|| -> Result<(), String> {
        let selected = select(job, config.seed)?;
        record.examples = selected
            .iter()
            .map(|s| ExampleRef {
                doc_id: s.candidate_id.clone(),
                score: s.score.is_finite().then_some(s.score),
            })
            .collect();
        let prompt = if job.method.is_few_shot() {
            let examples: Vec<(&Document, &[EntitySpan])> = selected
                .iter()
                .map(|s| {
                    let d = job.prep.by_id[s.candidate_id.as_str()];
                    (d, d.gold.as_slice())
                })
                .collect();
            renderer.render_few_shot(job.target, &examples, &dataset.labels, job.method)
        } else {
            renderer.render_zero_shot(job.target, &dataset.labels)
        }
        .map_err(|e| format!("prompt: {e}"))?;
        record.prompt_fingerprint = Some(prompt.fingerprint.clone());
        let meta = RequestMeta::new(&dataset.dataset_id, &job.target.doc_id);
        let exchange = gateway.complete(&prompt, job.run, &meta).map_err(|e| e.to_string())?;
        let parsed = parse_reply(&exchange.raw_response).map_err(|e| e.to_string())?;
        let aligned = align(&parsed.predictions, job.target, &dataset.labels);
        record.spans = aligned.spans;
        record.dropped = aligned.dropped;
        record.warnings = parsed.warnings;
        record.warnings.extend(aligned.warnings);
        Ok(())
    })();
    match outcome {
        Ok(()) => record.status = DocStatus::Ok,
        Err(reason) => {
            log::warn!(
                "{}/{} {} run {}: {reason}",
                dataset.dataset_id,
                job.target.doc_id,
                job.method,
                job.run
            );
            record.spans.clear();
            record.reason = Some(reason);
        }
    }
    record
}

fn vote(records: &[PredictionRecord], prep: &Prepared<'_>, method: Method) -> Result<Vec<PredictionRecord>, RunnerError> {
    let mut by_doc: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method && r.dataset_id == prep.dataset.dataset_id) {
        by_doc.entry(r.doc_id.as_str()).or_default().push(r);
    }
    let mut out = Vec::with_capacity(by_doc.len());
    for (doc_id, runs) in by_doc {
        let doc = prep.by_id[doc_id];
        let tags = runs
            .iter()
            .map(|r| {
                let RunLabel::Run(run_index) = r.run else {
                    unreachable!("only per-run records are voted")
                };
                Ok(RunTags {
                    doc_id: doc_id.to_string(),
                    run_index,
                    tags: iob_from_spans(&r.spans, doc.len())?,
                })
            })
            .collect::<Result<Vec<_>, RunnerError>>()?;
        let voted = majority_vote(&tags, doc.len()).map_err(|e| RunnerError::Dataset(e.to_string()))?;
        out.push(PredictionRecord {
            dataset_id: prep.dataset.dataset_id.clone(),
            method,
            run: RunLabel::Voted,
            doc_id: doc_id.to_string(),
            status: DocStatus::Ok,
            reason: None,
            prompt_fingerprint: None,
            examples: Vec::new(),
            spans: spans_from_iob(&voted).spans,
            dropped: Vec::new(),
            warnings: Vec::new(),
        });
    }
    Ok(out)
}

/// Runs the configured matrix with an explicit provider and writes every
/// artifact into the output directory. Existing exchanges there are
/// reused as a cache.
pub fn run_with_provider(
    config: &ExperimentConfig,
    datasets: &[LoadedDataset],
    provider: Box<dyn Provider>,
) -> Result<RunOutcome, RunnerError> {
    config.validate()?;
    let started = Instant::now();
    let started_at = chrono::Utc::now().to_rfc3339();
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| RunnerError::io(out, e))?;
    let exchanges_path = out.join("exchanges.jsonl");
    let store = ExchangeStore::open(&exchanges_path)?;
    let gateway = Gateway::new(config.provider.provider_config(), provider, store);
    let renderer = PromptRenderer {
        max_example_chars: config.max_example_chars,
    };

    let mut stopwords = StopWords::builtin();
    for d in datasets {
        if let Some(text) = &d.extra_stopwords {
            stopwords.insert_list(&d.dataset.language, text);
        }
    }
    let prepared: Vec<Prepared<'_>> = datasets
        .iter()
        .map(|d| prepare(d, config, &stopwords))
        .collect::<Result<_, _>>()?;

    let mut jobs = Vec::new();
    for prep in &prepared {
        for &method in &config.methods {
            for run in 0..config.runs {
                for &target in &prep.targets {
                    jobs.push(Job {
                        prep,
                        method,
                        run,
                        target,
                    });
                }
            }
        }
    }
    log::info!(
        "{} datasets, {} methods, {} runs: {} documents to annotate",
        prepared.len(),
        config.methods.len(),
        config.runs,
        jobs.len()
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunnerError::Config(format!("worker pool: {e}")))?;
    let mut records: Vec<PredictionRecord> =
        pool.install(|| jobs.par_iter().map(|j| execute(j, config, &gateway, &renderer)).collect());
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let entries: Vec<ManifestEntry> = records
        .iter()
        .map(|r| ManifestEntry {
            dataset_id: r.dataset_id.clone(),
            method: r.method,
            run: match r.run {
                RunLabel::Run(i) => i,
                RunLabel::Voted => unreachable!("votes are added later"),
            },
            doc_id: r.doc_id.clone(),
            status: r.status,
            reason: r.reason.clone(),
            examples: r.examples.iter().map(|e| e.doc_id.clone()).collect(),
        })
        .collect();

    if config.runs >= MIN_RUNS_FOR_VOTE {
        let mut voted = Vec::new();
        for prep in &prepared {
            for &method in &config.methods {
                voted.extend(vote(&records, prep, method)?);
            }
        }
        records.extend(voted);
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    let mut reports = Vec::new();
    for prep in &prepared {
        reports.extend(score_predictions(&records, prep.dataset)?);
    }
    reports.sort_by(|a, b| {
        (&a.dataset_id, a.method, a.run, a.mode).cmp(&(&b.dataset_id, b.method, b.run, b.mode))
    });

    let predictions_path = out.join("predictions.jsonl");
    let scores_path = out.join("scores.jsonl");
    let tables_dir = out.join("tables");
    write_jsonl(&predictions_path, &records)?;
    write_jsonl(&scores_path, &reports)?;
    let mut artifacts = BTreeMap::new();
    artifacts.insert("exchanges".to_string(), exchanges_path);
    artifacts.insert("predictions".to_string(), predictions_path);
    artifacts.insert("scores".to_string(), scores_path);
    for path in export_tables(&reports, config.confidence, &tables_dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        artifacts.insert(format!("tables/{name}"), path);
    }
    let manifest_path = out.join("manifest.json");
    artifacts.insert("manifest".to_string(), manifest_path.clone());

    let failed = entries.iter().filter(|e| e.status == DocStatus::Failed).count();
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started_at,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        provider_calls: gateway.provider_calls(),
        cache_hits: gateway.cache_hits(),
        failed,
        random_selection: format!(
            "random examples are redrawn for every run from a generator keyed by (seed {}, run index, target doc id)",
            config.seed
        ),
        datasets: prepared
            .iter()
            .map(|p| DatasetSummary {
                dataset_id: p.dataset.dataset_id.clone(),
                language: p.dataset.language.clone(),
                labels: p.dataset.labels.labels().to_vec(),
                documents: p.dataset.documents.len(),
                targets: p.targets.len(),
                parse_warnings: p.dataset.warnings.len(),
            })
            .collect(),
        entries,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunnerError::io(&manifest_path, e))?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| RunnerError::io(&manifest_path, e))?;
    log::info!(
        "finished: {} provider calls, {} cache hits, {failed} failed documents",
        manifest.provider_calls,
        manifest.cache_hits
    );
    Ok(RunOutcome {
        manifest,
        reports,
        predictions: records,
    })
}
