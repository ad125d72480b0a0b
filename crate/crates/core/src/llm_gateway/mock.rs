//! Deterministic offline provider.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, GatewayError, Provider, ProviderError};
use crate::corpus::Dataset;
use crate::prompting::serialize_annotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Reply with the target document's gold annotation.
    GoldEcho,
    /// Reply from a fingerprint-indexed script.
    Scripted,
    /// Gold annotation wrapped in prose and a code fence, single-quoted,
    /// with a trailing comma.
    Corrupt,
}

impl fmt::Display for MockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MockMode::GoldEcho => "gold_echo",
            MockMode::Scripted => "scripted",
            MockMode::Corrupt => "corrupt",
        })
    }
}

impl FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold_echo" => Ok(MockMode::GoldEcho),
            "scripted" => Ok(MockMode::Scripted),
            "corrupt" => Ok(MockMode::Corrupt),
            other => Err(format!("unknown mock mode {other:?}")),
        }
    }
}

/// Script entry: one reply for every run, or one per run index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Single(String),
    PerRun(Vec<String>),
}

/// Loads a JSON object mapping prompt fingerprints to a reply string or a
/// list of per-run replies.
pub fn load_script(path: &Path) -> Result<HashMap<String, Vec<String>>, GatewayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let raw: HashMap<String, ScriptEntry> = serde_json::from_str(&text)
        .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| match v {
            ScriptEntry::Single(s) => (k, vec![s]),
            ScriptEntry::PerRun(v) => (k, v),
        })
        .collect())
}

/// (dataset id, doc id) -> (document text, gold (surface, label) pairs)
type GoldIndex = HashMap<(String, String), (String, Vec<(String, String)>)>;

pub struct MockProvider {
    mode: MockMode,
    gold: GoldIndex,
    script: HashMap<String, Vec<String>>,
}

fn single_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

impl MockProvider {
    fn with_gold<'a>(mode: MockMode, datasets: impl IntoIterator<Item = &'a Dataset>) -> Self {
        let mut gold = HashMap::new();
        for ds in datasets {
            for doc in &ds.documents {
                let pairs = doc
                    .gold
                    .iter()
                    .map(|s| (doc.span_text(s), s.label.clone()))
                    .collect();
                gold.insert(
                    (ds.dataset_id.clone(), doc.doc_id.clone()),
                    (serialize_annotation(doc, &doc.gold), pairs),
                );
            }
        }
        Self {
            mode,
            gold,
            script: HashMap::new(),
        }
    }

    pub fn gold_echo<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> Self {
        Self::with_gold(MockMode::GoldEcho, datasets)
    }

    pub fn corrupt<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> Self {
        Self::with_gold(MockMode::Corrupt, datasets)
    }

    /// A reply list of length one serves every run index.
    pub fn scripted(script: HashMap<String, Vec<String>>) -> Self {
        Self {
            mode: MockMode::Scripted,
            gold: HashMap::new(),
            script,
        }
    }

    pub fn mode(&self) -> MockMode {
        self.mode
    }

    fn corrupt_text(pairs: &[(String, String)]) -> String {
        let mut list = String::from("[");
        for (surface, label) in pairs {
            list.push_str(&format!("({}, {}),", single_quote(surface), single_quote(label)));
        }
        list.push(']');
        format!(
            "Sure! Here are the named entities I found in the passage:\n\n```python\n{list}\n```\n\nLet me know if you need anything else."
        )
    }
}

impl Provider for MockProvider {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        match self.mode {
            MockMode::Scripted => {
                let fp = &req.prompt.fingerprint;
                let replies = self
                    .script
                    .get(fp)
                    .ok_or_else(|| ProviderError::ScriptMiss(fp.clone()))?;
                let reply = if replies.len() == 1 {
                    replies.first()
                } else {
                    replies.get(req.run_index as usize)
                };
                reply
                    .cloned()
                    .ok_or_else(|| ProviderError::ScriptMiss(format!("{fp} (run {})", req.run_index)))
            }
            MockMode::GoldEcho | MockMode::Corrupt => {
                let key = (req.meta.dataset_id.clone(), req.meta.doc_id.clone());
                let (clean, pairs) = self.gold.get(&key).ok_or_else(|| {
                    ProviderError::Fatal(format!(
                        "mock has no gold for {}/{}",
                        req.meta.dataset_id, req.meta.doc_id
                    ))
                })?;
                Ok(if self.mode == MockMode::GoldEcho {
                    clean.clone()
                } else {
                    Self::corrupt_text(pairs)
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, EntitySpan};
    use crate::llm_gateway::RequestMeta;
    use crate::prompting::{fingerprint, Method, RenderedPrompt};
    use crate::response::parse_reply;

    fn dataset() -> Dataset {
        let d = Document::from_surfaces("d1", &["Berlin"], vec![EntitySpan::new(0, 1, "LOC")]);
        let e = Document::from_surfaces("d2", &["O'Neil", "went"], vec![EntitySpan::new(0, 1, "PER")]);
        Dataset::new("ds", "en", vec![d, e], None).unwrap()
    }

    fn ask(p: &MockProvider, doc: &str, run: u32, text: &str) -> Result<String, ProviderError> {
        let prompt = RenderedPrompt {
            text: text.into(),
            fingerprint: fingerprint(text),
            method: Method::Baseline,
        };
        let meta = RequestMeta::new("ds", doc);
        p.complete(&CompletionRequest {
            prompt: &prompt,
            run_index: run,
            model_id: "m",
            temperature: 0.0,
            meta: &meta,
        })
    }

    #[test]
    fn gold_echo_reply() {
        let ds = dataset();
        let p = MockProvider::gold_echo([&ds]);
        assert_eq!(ask(&p, "d1", 0, "x").unwrap(), r#"[("Berlin", "LOC")]"#);
        assert!(matches!(ask(&p, "nope", 0, "x"), Err(ProviderError::Fatal(_))));
    }

    #[test]
    fn corrupt_reply_still_parses() {
        let ds = dataset();
        let p = MockProvider::corrupt([&ds]);
        let text = ask(&p, "d2", 0, "x").unwrap();
        assert!(text.contains("```python"));
        assert!(text.contains("'O\\'Neil'"));
        let parsed = parse_reply(&text).unwrap();
        assert_eq!(parsed.predictions.len(), 1);
        assert_eq!(parsed.predictions[0].surface, "O'Neil");
        assert_eq!(parsed.predictions[0].label, "PER");
    }

    #[test]
    fn scripted_by_run() {
        let mut script = HashMap::new();
        script.insert(fingerprint("a"), vec!["r0".into(), "r1".into()]);
        script.insert(fingerprint("b"), vec!["same".into()]);
        let p = MockProvider::scripted(script);
        assert_eq!(ask(&p, "d", 1, "a").unwrap(), "r1");
        assert_eq!(ask(&p, "d", 2, "b").unwrap(), "same");
        assert!(matches!(ask(&p, "d", 2, "a"), Err(ProviderError::ScriptMiss(_))));
        assert!(matches!(ask(&p, "d", 0, "c"), Err(ProviderError::ScriptMiss(_))));
    }

    #[test]
    fn script_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, r#"{"abc": "one", "def": ["x", "y", "z"]}"#).unwrap();
        let s = load_script(&path).unwrap();
        assert_eq!(s["abc"], vec!["one".to_string()]);
        assert_eq!(s["def"].len(), 3);
    }
}
