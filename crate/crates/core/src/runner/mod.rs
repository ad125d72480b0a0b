//! Experiment orchestration: dataset loading, the method × run × document
//! matrix, voting, scoring and table export.

mod config;
mod experiment;
mod export;

pub use config::{
    DatasetConfig, ExperimentConfig, ProviderKind, ProviderSection, TargetSplit, DEFAULT_RUNS, DEFAULT_WORKERS,
};
pub use experiment::{
    build_provider, load_dataset, load_datasets, run_experiment, run_with_provider, DatasetSummary,
    LoadedDataset, ManifestEntry, RunManifest, RunOutcome, MANIFEST_SCHEMA_VERSION,
};
pub use export::{
    aggregate, export_tables, format_cell, format_gain, method_table, scores_csv, vote_summaries, voting_table,
    AggregateRow, VoteSummary,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_spans, CorpusError, Dataset, EntitySpan};
use crate::llm_gateway::GatewayError;
use crate::prompting::Method;
use crate::response::{DroppedPrediction, ReplyWarning};
use crate::retrieval::RetrievalError;
use crate::scoring::{micro_f1, score_document, MatchMode, RunLabel, ScoreReport};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl RunnerError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        RunnerError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<CorpusError> for RunnerError {
    fn from(e: CorpusError) -> Self {
        RunnerError::Dataset(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocStatus {
    Ok,
    Failed,
}

/// A retrieved in-context example. Non-finite similarity scores (zero
/// embedding vectors) are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRef {
    pub doc_id: String,
    pub score: Option<f64>,
}

/// Outcome of one (method, run, document) triple, or of the vote over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dataset_id: String,
    pub method: Method,
    pub run: RunLabel,
    pub doc_id: String,
    pub status: DocStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<ExampleRef>,
    pub spans: Vec<EntitySpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<DroppedPrediction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ReplyWarning>,
}

impl PredictionRecord {
    pub fn sort_key(&self) -> (&str, Method, RunLabel, &str) {
        (&self.dataset_id, self.method, self.run, &self.doc_id)
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, RunnerError> {
    let file = std::fs::File::open(path).map_err(|e| RunnerError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RunnerError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RunnerError::io(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), RunnerError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).map_err(|e| RunnerError::io(path, e))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| RunnerError::io(path, e))
}

/// Scores every (method, run) group of `records` that belongs to `gold`'s
/// dataset, in both matching modes. Each group is scored over every
/// document that appears in any group; a document absent from a group
/// counts as an empty prediction.
pub fn score_predictions(records: &[PredictionRecord], gold: &Dataset) -> Result<Vec<ScoreReport>, RunnerError> {
    let ours: Vec<&PredictionRecord> = records.iter().filter(|r| r.dataset_id == gold.dataset_id).collect();
    if ours.is_empty() {
        return Err(RunnerError::Dataset(format!(
            "no predictions for dataset {:?}",
            gold.dataset_id
        )));
    }
    let docs: BTreeSet<&str> = ours.iter().map(|r| r.doc_id.as_str()).collect();
    let by_id: BTreeMap<&str, _> = gold.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    for d in &docs {
        if !by_id.contains_key(d) {
            return Err(RunnerError::Dataset(format!(
                "predicted document {d:?} not in gold dataset {:?}",
                gold.dataset_id
            )));
        }
    }
    let mut groups: BTreeMap<(Method, RunLabel), BTreeMap<&str, &PredictionRecord>> = BTreeMap::new();
    for r in &ours {
        groups
            .entry((r.method, r.run))
            .or_default()
            .insert(r.doc_id.as_str(), r);
    }
    let empty: Vec<EntitySpan> = Vec::new();
    let mut reports = Vec::new();
    for ((method, run), preds) in groups {
        for mode in MatchMode::ALL {
            let mut scores = Vec::with_capacity(docs.len());
            for d in &docs {
                let doc = by_id[d];
                let pred = match preds.get(d) {
                    Some(r) => &r.spans,
                    None => {
                        log::warn!("{method} run {run}: no prediction for {d}; scored as empty");
                        &empty
                    }
                };
                validate_spans(pred, doc.len())
                    .map_err(|e| RunnerError::Dataset(format!("{method} run {run} {d}: {e}")))?;
                let s = score_document(pred, &doc.gold, mode)
                    .map_err(|e| RunnerError::Dataset(format!("{method} run {run} {d}: {e}")))?;
                scores.push(s);
            }
            reports.push(ScoreReport::new(&gold.dataset_id, method, run, mode, micro_f1(&scores)));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn gold() -> Dataset {
        let a = Document::from_surfaces("a", &["Anna", "in", "Wien"], vec![EntitySpan::new(0, 1, "PER"), EntitySpan::new(2, 3, "LOC")]);
        let b = Document::from_surfaces("b", &["Bonn"], vec![EntitySpan::new(0, 1, "LOC")]);
        Dataset::new("g", "de", vec![a, b], None).unwrap()
    }

    fn rec(doc: &str, run: RunLabel, spans: Vec<EntitySpan>) -> PredictionRecord {
        PredictionRecord {
            dataset_id: "g".into(),
            method: Method::Baseline,
            run,
            doc_id: doc.into(),
            status: DocStatus::Ok,
            reason: None,
            prompt_fingerprint: None,
            examples: vec![],
            spans,
            dropped: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn missing_document_counts_as_all_false_negatives() {
        let records = vec![
            rec("a", RunLabel::Run(0), vec![EntitySpan::new(0, 1, "PER")]),
            rec("b", RunLabel::Run(1), vec![EntitySpan::new(0, 1, "LOC")]),
        ];
        let reports = score_predictions(&records, &gold()).unwrap();
        let r0 = reports
            .iter()
            .find(|r| r.run == RunLabel::Run(0) && r.mode == MatchMode::Strict)
            .unwrap();
        assert_eq!((r0.tp, r0.fp, r0.fn_), (1, 0, 2));
        let r1 = reports
            .iter()
            .find(|r| r.run == RunLabel::Run(1) && r.mode == MatchMode::Strict)
            .unwrap();
        assert_eq!((r1.tp, r1.fp, r1.fn_), (1, 0, 2));
    }

    #[test]
    fn rejects_unknown_docs_and_bad_spans() {
        assert!(score_predictions(&[rec("zz", RunLabel::Run(0), vec![])], &gold()).is_err());
        assert!(score_predictions(&[rec("b", RunLabel::Run(0), vec![EntitySpan::new(0, 4, "LOC")])], &gold()).is_err());
    }

    #[test]
    fn record_json_round_trip() {
        let mut r = rec("a", RunLabel::Voted, vec![EntitySpan::new(0, 1, "PER")]);
        r.examples.push(ExampleRef {
            doc_id: "b".into(),
            score: None,
        });
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains("\"run\":\"voted\""));
        assert_eq!(serde_json::from_str::<PredictionRecord>(&line).unwrap(), r);
    }
}
