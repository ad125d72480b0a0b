//! HIPE-style token/tag TSV ingestion and the IOB codec.
//!
//! A file is a sequence of rows, one token per row, with `#` comment lines
//! carrying metadata. Comment lines of the form `# <prefix>document_id = X`
//! delimit documents. When a file has no such lines, blank lines delimit
//! documents instead. The column header is either a comment line holding
//! tab-separated names (`# TOKEN\tNE-COARSE-LIT\t...`) or a first
//! uncommented row whose first field is `TOKEN`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tag column used by the coarse task.
pub const DEFAULT_TAG_COLUMN: &str = "NE-COARSE-LIT";

/// Version written into (and required from) JSON dataset dumps.
pub const DUMP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no column header found before the first data row")]
    MissingHeader,
    #[error("tag column {0:?} not present in the column header")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown tag syntax {tag:?}")]
    UnknownTagSyntax { line: usize, tag: String },
    #[error("line {line}: I-{label} without an open {label} entity")]
    DanglingInsideTag { line: usize, label: String },
    #[error("spans overlap: {0} and {1}")]
    OverlappingSpans(EntitySpan, EntitySpan),
    #[error("span {span} out of bounds for length {len}")]
    SpanOutOfBounds { span: EntitySpan, len: usize },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("dataset {0:?} has an empty label set")]
    EmptyLabelSet(String),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("cannot merge datasets {0:?} and {1:?}")]
    DatasetMismatch(String, String),
    #[error("dataset dump: {0}")]
    Dump(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub index: usize,
}

/// Half-open token range `[start, end)` carrying an entity label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn is_candidate_pool(self) -> bool {
        matches!(self, Split::Train | Split::Dev)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub dataset_id: String,
    pub language: String,
    pub split: Split,
    pub tokens: Vec<Token>,
    pub gold: Vec<EntitySpan>,
}

impl Document {
    /// Builds a document from bare surfaces, assigning consecutive indices.
    pub fn from_surfaces<S: AsRef<str>>(
        doc_id: impl Into<String>,
        surfaces: &[S],
        gold: Vec<EntitySpan>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            dataset_id: String::new(),
            language: String::new(),
            split: Split::Train,
            tokens: surfaces
                .iter()
                .enumerate()
                .map(|(index, s)| Token {
                    surface: s.as_ref().to_string(),
                    index,
                })
                .collect(),
            gold,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Passage text: surfaces joined by single spaces.
    pub fn text(&self) -> String {
        join_surfaces(&self.tokens)
    }

    pub fn span_text(&self, span: &EntitySpan) -> String {
        join_surfaces(&self.tokens[span.start..span.end])
    }

    pub fn gold_tags(&self) -> Vec<IobTag> {
        iob_from_spans(&self.gold, self.len()).expect("gold spans validated at construction")
    }
}

fn join_surfaces(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.surface);
    }
    out
}

/// Ordered, duplicate-free list of entity labels for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub dataset_id: String,
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new(dataset_id: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let dataset_id = dataset_id.into();
        if labels.is_empty() {
            return Err(CorpusError::EmptyLabelSet(dataset_id));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.trim().is_empty() {
                return Err(CorpusError::InvalidLabelSet("blank label".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(CorpusError::InvalidLabelSet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { dataset_id, labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Maps a model-produced label onto the canonical label: trimmed and
    /// compared case-insensitively via uppercasing, exact otherwise.
    pub fn normalize(&self, raw: &str) -> Option<&str> {
        let wanted = raw.trim().to_uppercase();
        self.labels
            .iter()
            .find(|l| l.to_uppercase() == wanted)
            .map(String::as_str)
    }

    /// Comma-separated rendering in declared order.
    pub fn render(&self) -> String {
        self.labels.join(", ")
    }
}

/// One IOB tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IobTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl IobTag {
    pub fn label(&self) -> Option<&str> {
        match self {
            IobTag::Outside => None,
            IobTag::Begin(l) | IobTag::Inside(l) => Some(l),
        }
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IobTag::Outside => f.write_str("O"),
            IobTag::Begin(l) => write!(f, "B-{l}"),
            IobTag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for IobTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "O" {
            return Ok(IobTag::Outside);
        }
        match s.split_once('-') {
            Some(("B", l)) if !l.is_empty() => Ok(IobTag::Begin(l.to_string())),
            Some(("I", l)) if !l.is_empty() => Ok(IobTag::Inside(l.to_string())),
            _ => Err(s.to_string()),
        }
    }
}

impl Serialize for IobTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IobTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|t| serde::de::Error::custom(format!("unknown tag syntax {t:?}")))
    }
}

/// Spans decoded from a tag sequence, plus the positions of dangling `I-`
/// tags that were repaired into span starts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IobDecoding {
    pub spans: Vec<EntitySpan>,
    pub repaired: Vec<usize>,
}

/// Decodes IOB tags into maximal spans. An `I-X` that does not continue an
/// open `X` entity is treated as `B-X` and its position reported.
pub fn spans_from_iob(tags: &[IobTag]) -> IobDecoding {
    let mut out = IobDecoding::default();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            IobTag::Outside => {
                if let Some((start, label)) = open.take() {
                    out.spans.push(EntitySpan::new(start, i, label));
                }
            }
            IobTag::Begin(l) => {
                if let Some((start, label)) = open.take() {
                    out.spans.push(EntitySpan::new(start, i, label));
                }
                open = Some((i, l));
            }
            IobTag::Inside(l) => match open {
                Some((_, label)) if label == l => {}
                _ => {
                    if let Some((start, label)) = open.take() {
                        out.spans.push(EntitySpan::new(start, i, label));
                    }
                    out.repaired.push(i);
                    open = Some((i, l));
                }
            },
        }
    }
    if let Some((start, label)) = open {
        out.spans.push(EntitySpan::new(start, tags.len(), label));
    }
    out
}

/// Checks that spans are non-empty, within `len`, sorted and pairwise disjoint.
pub fn validate_spans(spans: &[EntitySpan], len: usize) -> Result<()> {
    for s in spans {
        if s.is_empty() || s.end > len {
            return Err(CorpusError::SpanOutOfBounds {
                span: s.clone(),
                len,
            });
        }
    }
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0].overlaps(w[1]) {
            return Err(CorpusError::OverlappingSpans(w[0].clone(), w[1].clone()));
        }
    }
    Ok(())
}

/// Encodes spans as IOB tags over `len` tokens.
pub fn iob_from_spans(spans: &[EntitySpan], len: usize) -> Result<Vec<IobTag>> {
    validate_spans(spans, len)?;
    let mut tags = vec![IobTag::Outside; len];
    for s in spans {
        tags[s.start] = IobTag::Begin(s.label.clone());
        for t in &mut tags[s.start + 1..s.end] {
            *t = IobTag::Inside(s.label.clone());
        }
    }
    Ok(tags)
}

/// Rewrites a tag sequence into its canonical valid form.
pub fn repair_iob(tags: &[IobTag]) -> Vec<IobTag> {
    let decoded = spans_from_iob(tags);
    iob_from_spans(&decoded.spans, tags.len()).expect("decoded spans are valid by construction")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarningKind {
    DanglingInside { label: String },
    MalformedRow { expected: usize, found: usize },
    UnknownTag { tag: String },
    EmptySurface,
}

/// A recoverable problem encountered while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub doc_id: String,
    pub kind: ParseWarningKind,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): ", self.line, self.doc_id)?;
        match &self.kind {
            ParseWarningKind::DanglingInside { label } => {
                write!(f, "dangling I-{label} treated as B-{label}")
            }
            ParseWarningKind::MalformedRow { expected, found } => {
                write!(f, "expected {expected} columns, found {found}")
            }
            ParseWarningKind::UnknownTag { tag } => write!(f, "unknown tag {tag:?} read as O"),
            ParseWarningKind::EmptySurface => f.write_str("row with empty token skipped"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub column: String,
    pub dataset_id: Option<String>,
    pub language: Option<String>,
    pub split: Split,
    /// Turn every recoverable warning into an error.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            column: DEFAULT_TAG_COLUMN.to_string(),
            dataset_id: None,
            language: None,
            split: Split::Train,
            strict: false,
        }
    }
}

/// A parsed dataset: documents of one or more splits plus their label set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dataset_id: String,
    pub language: String,
    pub documents: Vec<Document>,
    pub labels: LabelSet,
    pub warnings: Vec<ParseWarning>,
}

impl Dataset {
    /// Assembles a dataset, checking id uniqueness and span validity. The
    /// label set is derived from the gold spans (sorted) unless given.
    pub fn new(
        dataset_id: impl Into<String>,
        language: impl Into<String>,
        mut documents: Vec<Document>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let dataset_id = dataset_id.into();
        let language = language.into();
        let mut ids = HashSet::new();
        let mut used = BTreeSet::new();
        for doc in &mut documents {
            if !ids.insert(doc.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
            doc.gold.sort();
            validate_spans(&doc.gold, doc.len())?;
            used.extend(doc.gold.iter().map(|s| s.label.clone()));
            doc.dataset_id = dataset_id.clone();
            if doc.language.is_empty() {
                doc.language = language.clone();
            }
        }
        let labels = match labels {
            Some(declared) => {
                let set = LabelSet::new(dataset_id.clone(), declared)?;
                if let Some(missing) = used.iter().find(|l| !set.contains(l)) {
                    return Err(CorpusError::InvalidLabelSet(format!(
                        "gold label {missing:?} missing from declared set"
                    )));
                }
                set
            }
            None => LabelSet::new(dataset_id.clone(), used.into_iter().collect())?,
        };
        Ok(Self {
            dataset_id,
            language,
            documents,
            labels,
            warnings: Vec::new(),
        })
    }

    /// Concatenates split files of the same dataset.
    pub fn merge(parts: Vec<Dataset>, labels: Option<Vec<String>>) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| CorpusError::Dump("nothing to merge".into()))?;
        let dataset_id = first.dataset_id.clone();
        let language = first.language.clone();
        let mut docs = first.documents;
        let mut warnings = first.warnings;
        for part in iter {
            if part.dataset_id != dataset_id {
                return Err(CorpusError::DatasetMismatch(dataset_id, part.dataset_id));
            }
            docs.extend(part.documents);
            warnings.extend(part.warnings);
        }
        let mut merged = Dataset::new(dataset_id, language, docs, labels)?;
        merged.warnings = warnings;
        Ok(merged)
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn split<'a>(&'a self, splits: &'a [Split]) -> impl Iterator<Item = &'a Document> + 'a {
        self.documents.iter().filter(move |d| splits.contains(&d.split))
    }
}

/// Reads and parses one HIPE-style TSV file.
pub fn parse_dataset(path: &Path, options: &ParseOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut options = options.clone();
    if options.dataset_id.is_none() {
        options.dataset_id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    parse_str(&text, &options)
}

struct PendingDoc {
    doc_id: String,
    language: Option<String>,
    tokens: Vec<Token>,
    tags: Vec<(usize, IobTag)>,
}

impl PendingDoc {
    fn new(doc_id: String) -> Self {
        Self {
            doc_id,
            language: None,
            tokens: Vec::new(),
            tags: Vec::new(),
        }
    }
}

fn metadata(comment: &str) -> Option<(&str, &str)> {
    let (key, value) = comment.split_once('=')?;
    Some((key.trim(), value.trim()))
}

/// Parses TSV text; see [`parse_dataset`].
pub fn parse_str(text: &str, options: &ParseOptions) -> Result<Dataset> {
    let dataset_id = options
        .dataset_id
        .clone()
        .unwrap_or_else(|| "dataset".to_string());
    let split = options.split;
    let has_boundaries = text.lines().any(|l| {
        l.starts_with('#')
            && metadata(&l[1..]).is_some_and(|(k, _)| k.ends_with("document_id"))
    });

    let mut header: Option<(usize, usize)> = None; // (column count, tag index)
    let mut file_language: Option<String> = options.language.clone();
    let mut docs: Vec<PendingDoc> = Vec::new();
    let mut current: Option<PendingDoc> = None;
    let mut warnings = Vec::new();
    let mut synthetic = 0usize;
    let next_synthetic = |synthetic: &mut usize| {
        *synthetic += 1;
        format!("{dataset_id}-{split}-{synthetic:04}")
    };

    let resolve_header = |fields: Vec<&str>| -> Result<(usize, usize)> {
        let idx = fields
            .iter()
            .position(|f| f.trim() == options.column)
            .ok_or_else(|| CorpusError::MissingColumn(options.column.clone()))?;
        Ok((fields.len(), idx))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches(['\r', '\n']);
        if let Some(comment) = line.strip_prefix('#') {
            let body = comment.strip_prefix(' ').unwrap_or(comment);
            if header.is_none() && body.contains('\t') {
                header = Some(resolve_header(body.split('\t').collect())?);
                continue;
            }
            if let Some((key, value)) = metadata(comment) {
                if key.ends_with("document_id") {
                    if let Some(doc) = current.take() {
                        docs.push(doc);
                    }
                    current = Some(PendingDoc::new(value.to_string()));
                } else if key.ends_with("language") {
                    match current.as_mut() {
                        Some(doc) => doc.language = Some(value.to_string()),
                        None => {
                            file_language.get_or_insert_with(|| value.to_string());
                        }
                    }
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            if !has_boundaries {
                if let Some(doc) = current.take() {
                    docs.push(doc);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if header.is_none() {
            if fields[0] == "TOKEN" {
                header = Some(resolve_header(fields)?);
                continue;
            }
            return Err(CorpusError::MissingHeader);
        }
        let (ncols, tag_idx) = header.expect("checked above");

        let doc = current.get_or_insert_with(|| PendingDoc::new(next_synthetic(&mut synthetic)));
        let warn = |kind: ParseWarningKind| ParseWarning {
            line: line_no,
            doc_id: doc.doc_id.clone(),
            kind,
        };

        if fields.len() != ncols {
            if options.strict {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    expected: ncols,
                    found: fields.len(),
                });
            }
            warnings.push(warn(ParseWarningKind::MalformedRow {
                expected: ncols,
                found: fields.len(),
            }));
        }
        let surface = fields[0].trim();
        if surface.is_empty() {
            if options.strict {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    expected: ncols,
                    found: fields.len(),
                });
            }
            warnings.push(warn(ParseWarningKind::EmptySurface));
            continue;
        }
        let tag = match fields.get(tag_idx) {
            Some(raw_tag) => match raw_tag.parse::<IobTag>() {
                Ok(tag) => tag,
                Err(bad) => {
                    if options.strict {
                        return Err(CorpusError::UnknownTagSyntax {
                            line: line_no,
                            tag: bad,
                        });
                    }
                    warnings.push(warn(ParseWarningKind::UnknownTag { tag: bad }));
                    IobTag::Outside
                }
            },
            None => IobTag::Outside,
        };
        let index = doc.tokens.len();
        doc.tokens.push(Token {
            surface: surface.to_string(),
            index,
        });
        doc.tags.push((line_no, tag));
    }
    if let Some(doc) = current.take() {
        docs.push(doc);
    }

    let language = file_language.unwrap_or_else(|| "und".to_string());
    let mut documents = Vec::with_capacity(docs.len());
    for pending in docs {
        let tags: Vec<IobTag> = pending.tags.iter().map(|(_, t)| t.clone()).collect();
        let decoded = spans_from_iob(&tags);
        for pos in decoded.repaired {
            let (line, tag) = &pending.tags[pos];
            let label = tag.label().unwrap_or_default().to_string();
            if options.strict {
                return Err(CorpusError::DanglingInsideTag { line: *line, label });
            }
            log::warn!("{}: line {line}: dangling I-{label} treated as B-{label}", pending.doc_id);
            warnings.push(ParseWarning {
                line: *line,
                doc_id: pending.doc_id.clone(),
                kind: ParseWarningKind::DanglingInside { label },
            });
        }
        documents.push(Document {
            doc_id: pending.doc_id,
            dataset_id: dataset_id.clone(),
            language: pending.language.unwrap_or_else(|| language.clone()),
            split,
            tokens: pending.tokens,
            gold: decoded.spans,
        });
    }

    let mut dataset = Dataset::new(dataset_id, language, documents, None)?;
    dataset.warnings = warnings;
    Ok(dataset)
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpDocument {
    doc_id: String,
    split: Split,
    language: String,
    tokens: Vec<String>,
    spans: Vec<EntitySpan>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetDump {
    schema_version: u32,
    dataset_id: String,
    language: String,
    labels: Vec<String>,
    documents: Vec<DumpDocument>,
}

/// Serializes a dataset into the versioned JSON dump.
pub fn dump_json(dataset: &Dataset) -> String {
    let dump = DatasetDump {
        schema_version: DUMP_SCHEMA_VERSION,
        dataset_id: dataset.dataset_id.clone(),
        language: dataset.language.clone(),
        labels: dataset.labels.labels().to_vec(),
        documents: dataset
            .documents
            .iter()
            .map(|d| DumpDocument {
                doc_id: d.doc_id.clone(),
                split: d.split,
                language: d.language.clone(),
                tokens: d.surfaces().map(str::to_string).collect(),
                spans: d.gold.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dump).expect("dump is always serializable")
}

pub fn load_json(text: &str) -> Result<Dataset> {
    let dump: DatasetDump =
        serde_json::from_str(text).map_err(|e| CorpusError::Dump(e.to_string()))?;
    if dump.schema_version != DUMP_SCHEMA_VERSION {
        return Err(CorpusError::Dump(format!(
            "unsupported schema version {}",
            dump.schema_version
        )));
    }
    let documents = dump
        .documents
        .into_iter()
        .map(|d| Document {
            tokens: d
                .tokens
                .into_iter()
                .enumerate()
                .map(|(index, surface)| Token { surface, index })
                .collect(),
            doc_id: d.doc_id,
            dataset_id: dump.dataset_id.clone(),
            language: d.language,
            split: d.split,
            gold: d.spans,
        })
        .collect();
    Dataset::new(dump.dataset_id, dump.language, documents, Some(dump.labels))
}
