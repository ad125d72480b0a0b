//! Entity-level strict and fuzzy micro precision, recall and F1.
//!
//! Strict: a prediction matches a gold span with identical boundaries and
//! label. Fuzzy: a prediction matches a gold span it overlaps by at least
//! one token and shares the label with. Matching is one-to-one; in fuzzy
//! mode each gold span (in start order) takes the first unmatched
//! overlapping prediction.

pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_spans, EntitySpan};
use crate::prompting::Method;
pub use stats::{aggregate_runs, AggregateStat, StatsError};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("invalid {side} spans: {reason}")]
    InvalidSpans { side: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Strict,
    Fuzzy,
}

impl MatchMode {
    pub const ALL: [MatchMode; 2] = [MatchMode::Strict, MatchMode::Fuzzy];
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Strict => "strict",
            MatchMode::Fuzzy => "fuzzy",
        })
    }
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(MatchMode::Strict),
            "fuzzy" => Ok(MatchMode::Fuzzy),
            _ => Err(format!("unknown match mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts for one document, in total and per label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub counts: Counts,
    pub per_label: BTreeMap<String, Counts>,
}

impl DocumentScore {
    pub fn tuple(&self) -> (usize, usize, usize) {
        (self.counts.tp, self.counts.fp, self.counts.fn_)
    }
}

fn check(spans: &[EntitySpan], side: &'static str) -> Result<(), ScoringError> {
    let len = spans.iter().map(|s| s.end).max().unwrap_or(0);
    validate_spans(spans, len).map_err(|e| ScoringError::InvalidSpans {
        side,
        reason: e.to_string(),
    })
}

/// Matches one document's predictions against its gold spans.
pub fn score_document(
    pred: &[EntitySpan],
    gold: &[EntitySpan],
    mode: MatchMode,
) -> Result<DocumentScore, ScoringError> {
    check(pred, "predicted")?;
    check(gold, "gold")?;
    let mut pred_sorted: Vec<&EntitySpan> = pred.iter().collect();
    pred_sorted.sort();
    let mut gold_sorted: Vec<&EntitySpan> = gold.iter().collect();
    gold_sorted.sort();

    let mut pred_used = vec![false; pred_sorted.len()];
    let mut gold_used = vec![false; gold_sorted.len()];
    for (gi, g) in gold_sorted.iter().enumerate() {
        let hit = pred_sorted.iter().enumerate().position(|(pi, p)| {
            !pred_used[pi]
                && p.label == g.label
                && match mode {
                    MatchMode::Strict => p.start == g.start && p.end == g.end,
                    MatchMode::Fuzzy => p.overlaps(g),
                }
        });
        if let Some(pi) = hit {
            pred_used[pi] = true;
            gold_used[gi] = true;
        }
    }

    let mut score = DocumentScore::default();
    let mut bump = |label: &str, c: Counts| {
        score.counts.add(c);
        score.per_label.entry(label.to_string()).or_default().add(c);
    };
    for (g, used) in gold_sorted.iter().zip(&gold_used) {
        bump(&g.label, if *used { Counts::new(1, 0, 0) } else { Counts::new(0, 0, 1) });
    }
    for (p, used) in pred_sorted.iter().zip(&pred_used) {
        if !used {
            bump(&p.label, Counts::new(0, 1, 0));
        }
    }
    Ok(score)
}

/// Micro-averaged precision/recall/F1 over summed document counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MicroScore {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_label: BTreeMap<String, Counts>,
}

pub fn micro_f1<'a, I>(documents: I) -> MicroScore
where
    I: IntoIterator<Item = &'a DocumentScore>,
{
    let mut counts = Counts::default();
    let mut per_label: BTreeMap<String, Counts> = BTreeMap::new();
    for d in documents {
        counts.add(d.counts);
        for (label, c) in &d.per_label {
            per_label.entry(label.clone()).or_default().add(*c);
        }
    }
    MicroScore {
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        counts,
        per_label,
    }
}

/// Which run a report covers: a single run index or the majority vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunLabel {
    Run(u32),
    Voted,
}

impl fmt::Display for RunLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunLabel::Run(i) => write!(f, "{i}"),
            RunLabel::Voted => f.write_str("voted"),
        }
    }
}

impl Serialize for RunLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RunLabel::Run(i) => s.serialize_u32(*i),
            RunLabel::Voted => s.serialize_str("voted"),
        }
    }
}

impl<'de> Deserialize<'de> for RunLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(u32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(RunLabel::Run(i)),
            Raw::Name(s) if s == "voted" => Ok(RunLabel::Voted),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("unknown run label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dataset_id: String,
    pub method: Method,
    pub run: RunLabel,
    pub mode: MatchMode,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_label: BTreeMap<String, Counts>,
}

impl ScoreReport {
    pub fn new(dataset_id: &str, method: Method, run: RunLabel, mode: MatchMode, micro: MicroScore) -> Self {
        Self {
            dataset_id: dataset_id.to_string(),
            method,
            run,
            mode,
            tp: micro.counts.tp,
            fp: micro.counts.fp,
            fn_: micro.counts.fn_,
            precision: micro.precision,
            recall: micro.recall,
            f1: micro.f1,
            per_label: micro.per_label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(start: usize, end: usize, label: &str) -> EntitySpan {
        EntitySpan::new(start, end, label)
    }

    #[test]
    fn perfect_match() {
        let g = [s(0, 2, "PER")];
        assert_eq!(score_document(&g, &g, MatchMode::Strict).unwrap().tuple(), (1, 0, 0));
    }

    #[test]
    fn boundary_mismatch() {
        let pred = [s(0, 1, "PER")];
        let gold = [s(0, 2, "PER")];
        assert_eq!(score_document(&pred, &gold, MatchMode::Strict).unwrap().tuple(), (0, 1, 1));
        assert_eq!(score_document(&pred, &gold, MatchMode::Fuzzy).unwrap().tuple(), (1, 0, 0));
    }

    #[test]
    fn label_mismatch_fails_both_modes() {
        let pred = [s(0, 2, "LOC")];
        let gold = [s(0, 2, "PER")];
        for mode in MatchMode::ALL {
            assert_eq!(score_document(&pred, &gold, mode).unwrap().tuple(), (0, 1, 1));
        }
    }

    #[test]
    fn fuzzy_is_one_to_one() {
        // one long prediction overlapping two gold spans only matches one
        let pred = [s(0, 4, "PER")];
        let gold = [s(0, 1, "PER"), s(2, 3, "PER")];
        assert_eq!(score_document(&pred, &gold, MatchMode::Fuzzy).unwrap().tuple(), (1, 0, 1));
    }

    #[test]
    fn per_label_counts() {
        let pred = [s(0, 1, "PER"), s(3, 4, "LOC")];
        let gold = [s(0, 1, "PER"), s(5, 6, "LOC")];
        let d = score_document(&pred, &gold, MatchMode::Strict).unwrap();
        assert_eq!(d.per_label["PER"], Counts::new(1, 0, 0));
        assert_eq!(d.per_label["LOC"], Counts::new(0, 1, 1));
    }

    #[test]
    fn invalid_spans() {
        let bad = [s(0, 2, "PER"), s(1, 3, "PER")];
        assert!(score_document(&bad, &[], MatchMode::Fuzzy).is_err());
        assert!(score_document(&[], &[s(1, 1, "X")], MatchMode::Fuzzy).is_err());
    }

    #[test]
    fn micro_aggregation() {
        let docs = [
            DocumentScore {
                counts: Counts::new(1, 0, 0),
                ..Default::default()
            },
            DocumentScore {
                counts: Counts::new(1, 1, 1),
                ..Default::default()
            },
        ];
        let m = micro_f1(&docs);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_predictions_score_zero() {
        let d = score_document(&[], &[s(0, 1, "PER")], MatchMode::Strict).unwrap();
        let m = micro_f1([&d]);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn run_label_serde() {
        assert_eq!(serde_json::to_string(&RunLabel::Run(2)).unwrap(), "2");
        assert_eq!(serde_json::to_string(&RunLabel::Voted).unwrap(), "\"voted\"");
        assert_eq!(serde_json::from_str::<RunLabel>("\"voted\"").unwrap(), RunLabel::Voted);
        assert_eq!(serde_json::from_str::<RunLabel>("1").unwrap(), RunLabel::Run(1));
        assert!(serde_json::from_str::<RunLabel>("\"x\"").is_err());
    }
}
