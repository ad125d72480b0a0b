//! `HNE-EMB v1` embedding table files.
//!
//! ```text
//! HNE-EMB v1 <dimension> <model_id>
//! <doc_id>\t<f> <f> ... <f>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::RetrievalError;

pub const MAGIC: &str = "HNE-EMB";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    model_id: String,
    vectors: HashMap<String, Vec<f64>>,
    order: Vec<String>,
}

fn bad(line: usize, msg: impl Into<String>) -> RetrievalError {
    RetrievalError::EmbeddingFormat {
        line,
        message: msg.into(),
    }
}

impl EmbeddingTable {
    pub fn new(dimension: usize, model_id: impl Into<String>) -> Self {
        Self {
            dimension,
            model_id: model_id.into(),
            vectors: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, vector: Vec<f64>) -> Result<(), RetrievalError> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() || doc_id.contains(['\t', '\n']) {
            return Err(bad(0, format!("invalid doc id {doc_id:?}")));
        }
        if vector.len() != self.dimension {
            return Err(bad(
                0,
                format!("{doc_id}: {} floats, expected {}", vector.len(), self.dimension),
            ));
        }
        if self.vectors.insert(doc_id.clone(), vector).is_some() {
            return Err(bad(0, format!("duplicate doc id {doc_id:?}")));
        }
        self.order.push(doc_id);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&[f64]> {
        self.vectors.get(doc_id).map(Vec::as_slice)
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.vectors.contains_key(doc_id)
    }

    pub fn parse(text: &str) -> Result<Self, RetrievalError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let mut parts = header.splitn(4, ' ');
        if parts.next() != Some(MAGIC) || parts.next() != Some(FORMAT_VERSION) {
            return Err(bad(1, format!("expected '{MAGIC} {FORMAT_VERSION}' header")));
        }
        let dimension: usize = parts
            .next()
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| bad(1, "invalid dimension"))?;
        let model_id = parts.next().unwrap_or("").trim();
        if model_id.is_empty() {
            return Err(bad(1, "missing model id"));
        }
        let mut table = Self::new(dimension, model_id);
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let (doc_id, floats) = line
                .split_once('\t')
                .ok_or_else(|| bad(line_no, "missing tab after doc id"))?;
            let vector = floats
                .split(' ')
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(line_no, format!("invalid float {f:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if vector.len() != dimension {
                return Err(bad(
                    line_no,
                    format!("{} floats, expected {dimension}", vector.len()),
                ));
            }
            if table.vectors.contains_key(doc_id) {
                return Err(bad(line_no, format!("duplicate doc id {doc_id:?}")));
            }
            table.vectors.insert(doc_id.to_string(), vector);
            table.order.push(doc_id.to_string());
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|e| RetrievalError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Serializes with shortest round-trip float formatting, rows in
    /// insertion order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {FORMAT_VERSION} {} {}\n", self.dimension, self.model_id);
        for id in &self.order {
            out.push_str(id);
            out.push('\t');
            for (i, v) in self.vectors[id].iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_write_back() {
        let text = "HNE-EMB v1 3 distiluse-base-multilingual-cased-v2\nd1\t0.1 0.2 0.3\nd2\t-1 0 1e-3\n";
        let t = EmbeddingTable::parse(text).unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.model_id(), "distiluse-base-multilingual-cased-v2");
        assert_eq!(t.get("d2").unwrap(), [-1.0, 0.0, 0.001]);
        let again = EmbeddingTable::parse(&t.to_text()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn format_errors() {
        for bad_text in [
            "",
            "HNE-EMB v2 3 m\n",
            "HNE-EMB v1 0 m\n",
            "HNE-EMB v1 2\n",
            "HNE-EMB v1 2 m\nd1 0.1 0.2\n",
            "HNE-EMB v1 2 m\nd1\t0.1\n",
            "HNE-EMB v1 2 m\nd1\t0.1 x\n",
            "HNE-EMB v1 2 m\nd1\t0.1 NaN\n",
            "HNE-EMB v1 2 m\nd1\t0.1 0.2\nd1\t0.1 0.2\n",
        ] {
            assert!(EmbeddingTable::parse(bad_text).is_err(), "{bad_text:?}");
        }
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), Some(0.0));
        assert_eq!(cosine(&[0.0, 0.0], &[0.0, 1.0]), None);
    }
}
