//! Zero-shot and few-shot prompt rendering.
//!
//! Both prompts share one instruction block. A few-shot prompt inserts a
//! `Passage:`/`Annotation:` pair per example, in retrieval rank order,
//! before the target passage. Blocks are separated by one blank line and
//! the prompt ends with a newline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Document, EntitySpan, LabelSet};

const INSTRUCTIONS_HEAD: &str =
    "Your task is to identify and label named entities in the passage below using the following entity label set: ";

const INSTRUCTIONS_TAIL: &str = "

Important guidelines:
- There should be no overlap between different entities (i.e., no nested or intersecting spans).
- Only include spans that match one of the specified labels.
- Be precise and only extract valid named entities.
- Do not return an empty list. There are always some entities in the passage.

Output format:

A Python list of tuples, where each tuple is of the form: (\"entity text\", \"entity label\").

Do not include any explanation or introductory text. Your output must be *only* a valid Python list of tuples.";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("target document {0:?} has no tokens")]
    EmptyDocument(String),
    #[error("few-shot prompt needs at least one example")]
    EmptyExamples,
    #[error("example {0:?} is the target document")]
    TargetAsExample(String),
}

/// Prompting method, named as in result tables (`baseline`, `r3`,
/// `embedding1`, `overlap5`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Baseline,
    Random(usize),
    Embedding(usize),
    Overlap(usize),
}

impl Method {
    pub fn k(self) -> usize {
        match self {
            Method::Baseline => 0,
            Method::Random(k) | Method::Embedding(k) | Method::Overlap(k) => k,
        }
    }

    pub fn is_few_shot(self) -> bool {
        self.k() > 0
    }

    /// The ten methods compared in the result tables, in column order.
    pub fn replication_set() -> Vec<Method> {
        let mut m = vec![Method::Baseline];
        for ctor in [Method::Random, Method::Embedding, Method::Overlap] {
            m.extend([1, 3, 5].map(ctor));
        }
        m
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => f.write_str("baseline"),
            Method::Random(k) => write!(f, "r{k}"),
            Method::Embedding(k) => write!(f, "embedding{k}"),
            Method::Overlap(k) => write!(f, "overlap{k}"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "baseline" {
            return Ok(Method::Baseline);
        }
        let (ctor, digits): (fn(usize) -> Method, &str) = if let Some(d) = s.strip_prefix("embedding") {
            (Method::Embedding, d)
        } else if let Some(d) = s.strip_prefix("overlap") {
            (Method::Overlap, d)
        } else if let Some(d) = s.strip_prefix('r') {
            (Method::Random, d)
        } else {
            return Err(format!("unknown method {s:?}"));
        };
        match digits.parse::<usize>() {
            Ok(k) if k >= 1 && !digits.starts_with(['+', '0']) => Ok(ctor(k)),
            _ => Err(format!("unknown method {s:?}")),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub fingerprint: String,
    pub method: Method,
}

impl RenderedPrompt {
    fn new(text: String, method: Method) -> Self {
        Self {
            fingerprint: fingerprint(&text),
            text,
            method,
        }
    }
}

/// Hex SHA-256 of the prompt text.
pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The shared instruction block, up to the first `Passage:` line.
pub fn instruction_block(labels: &LabelSet) -> String {
    format!("{INSTRUCTIONS_HEAD}{}{INSTRUCTIONS_TAIL}", labels.render())
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Formats `(surface, label)` pairs as a Python list of tuples:
/// `[("H. Klee", "PER"), ("Berlin", "LOC")]`.
pub fn format_tuple_list<'a, I>(pairs: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let items: Vec<String> = pairs
        .into_iter()
        .map(|(surface, label)| format!("({}, {})", quote(surface), quote(label)))
        .collect();
    format!("[{}]", items.join(", "))
}

/// A document's spans in tuple-list syntax, surfaces rebuilt from tokens.
pub fn serialize_annotation(doc: &Document, spans: &[EntitySpan]) -> String {
    let surfaces: Vec<(String, &str)> = spans
        .iter()
        .map(|s| (doc.span_text(s), s.label.as_str()))
        .collect();
    format_tuple_list(surfaces.iter().map(|(s, l)| (s.as_str(), *l)))
}

/// Renders prompts; `max_example_chars` (off by default) caps the length
/// of each example passage. The target passage is never truncated.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptRenderer {
    pub max_example_chars: Option<usize>,
}

impl PromptRenderer {
    pub fn render_zero_shot(&self, target: &Document, labels: &LabelSet) -> Result<RenderedPrompt, PromptError> {
        if target.is_empty() {
            return Err(PromptError::EmptyDocument(target.doc_id.clone()));
        }
        let text = format!("{}\n\nPassage: {}\n", instruction_block(labels), target.text());
        Ok(RenderedPrompt::new(text, Method::Baseline))
    }

    pub fn render_few_shot(
        &self,
        target: &Document,
        examples: &[(&Document, &[EntitySpan])],
        labels: &LabelSet,
        method: Method,
    ) -> Result<RenderedPrompt, PromptError> {
        if target.is_empty() {
            return Err(PromptError::EmptyDocument(target.doc_id.clone()));
        }
        if examples.is_empty() {
            return Err(PromptError::EmptyExamples);
        }
        let mut text = instruction_block(labels);
        for (doc, spans) in examples {
            if doc.doc_id == target.doc_id {
                return Err(PromptError::TargetAsExample(doc.doc_id.clone()));
            }
            let (passage, annotation) = self.example_block(doc, spans);
            text.push_str("\n\nPassage: ");
            text.push_str(&passage);
            text.push_str("\n\nAnnotation: ");
            text.push_str(&annotation);
        }
        text.push_str("\n\nPassage: ");
        text.push_str(&target.text());
        text.push('\n');
        Ok(RenderedPrompt::new(text, method))
    }

    fn example_block(&self, doc: &Document, spans: &[EntitySpan]) -> (String, String) {
        let Some(max) = self.max_example_chars else {
            return (doc.text(), serialize_annotation(doc, spans));
        };
        // longest token prefix whose passage fits; spans must end inside it
        let mut kept = 0;
        let mut chars = 0;
        for (i, t) in doc.tokens.iter().enumerate() {
            let next = chars + usize::from(i > 0) + t.surface.chars().count();
            if next > max {
                break;
            }
            chars = next;
            kept = i + 1;
        }
        let mut prefix = doc.clone();
        prefix.tokens.truncate(kept);
        let spans: Vec<EntitySpan> = spans.iter().filter(|s| s.end <= kept).cloned().collect();
        (prefix.text(), serialize_annotation(&prefix, &spans))
    }
}

pub fn render_zero_shot(target: &Document, labels: &LabelSet) -> Result<RenderedPrompt, PromptError> {
    PromptRenderer::default().render_zero_shot(target, labels)
}

pub fn render_few_shot(
    target: &Document,
    examples: &[(&Document, &[EntitySpan])],
    labels: &LabelSet,
    method: Method,
) -> Result<RenderedPrompt, PromptError> {
    PromptRenderer::default().render_few_shot(target, examples, labels, method)
}
