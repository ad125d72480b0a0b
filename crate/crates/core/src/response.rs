//! Turning a model reply into spans on the target document.
//!
//! [`parse_reply`] pulls the first well-formed list of 2-tuples out of the
//! reply text. [`align`] then places each `(surface, label)` pair on the
//! target's tokens, leftmost unassigned occurrence first.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, EntitySpan, LabelSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub surface: String,
    pub label: String,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplyWarning {
    /// The reply held `[]`; the prompt forbids it.
    EmptyReply,
    /// A tuple whose surface was blank after trimming.
    EmptySurface { order: usize },
}

impl fmt::Display for ReplyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplyWarning::EmptyReply => f.write_str("model returned an empty list"),
            ReplyWarning::EmptySurface { order } => write!(f, "tuple {order} has an empty surface"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplyError {
    #[error("no bracketed list of tuples found in reply")]
    UnparseableReply,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedReply {
    pub predictions: Vec<RawPrediction>,
    pub warnings: Vec<ReplyWarning>,
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Option<String> {
        self.skip_ws();
        let quote = match self.bump()? {
            q @ ('"' | '\'') => q,
            _ => return None,
        };
        let mut out = String::new();
        loop {
            match self.bump()? {
                c if c == quote => return Some(out),
                '\\' => match self.bump()? {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    c @ ('\\' | '"' | '\'') => out.push(c),
                    c => {
                        out.push('\\');
                        out.push(c);
                    }
                },
                '\n' => return None,
                c => out.push(c),
            }
        }
    }

    fn tuple(&mut self) -> Option<(String, String)> {
        if !self.eat('(') {
            return None;
        }
        let surface = self.string()?;
        if !self.eat(',') {
            return None;
        }
        let label = self.string()?;
        self.eat(',');
        if !self.eat(')') {
            return None;
        }
        Some((surface, label))
    }

    fn list(&mut self) -> Option<Vec<(String, String)>> {
        if !self.eat('[') {
            return None;
        }
        let mut items = Vec::new();
        if self.eat(']') {
            return Some(items);
        }
        loop {
            items.push(self.tuple()?);
            if self.eat(',') {
                if self.eat(']') {
                    return Some(items);
                }
            } else if self.eat(']') {
                return Some(items);
            } else {
                return None;
            }
        }
    }
}

/// Extracts the first well-formed list of `(surface, label)` tuples.
/// Surrounding prose and code fences are ignored; strings may use either
/// quote style and trailing commas are accepted.
pub fn parse_reply(raw: &str) -> Result<ParsedReply, ReplyError> {
    for (start, _) in raw.match_indices('[') {
        let mut scanner = Scanner { src: raw, pos: start };
        let Some(items) = scanner.list() else {
            continue;
        };
        let mut parsed = ParsedReply::default();
        if items.is_empty() {
            parsed.warnings.push(ReplyWarning::EmptyReply);
        }
        for (order, (surface, label)) in items.into_iter().enumerate() {
            let surface = surface.trim();
            if surface.is_empty() {
                parsed.warnings.push(ReplyWarning::EmptySurface { order });
                continue;
            }
            parsed.predictions.push(RawPrediction {
                surface: surface.to_string(),
                label,
                order,
            });
        }
        return Ok(parsed);
    }
    Err(ReplyError::UnparseableReply)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    UnknownLabel,
    NoMatch,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedPrediction {
    pub prediction: RawPrediction,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPrediction {
    pub spans: Vec<EntitySpan>,
    pub dropped: Vec<DroppedPrediction>,
    pub warnings: Vec<ReplyWarning>,
}

fn find_free(
    tokens: &[&str],
    words: &[&str],
    taken: &[bool],
    eq: impl Fn(&str, &str) -> bool,
) -> (Option<usize>, bool) {
    let m = words.len();
    let mut seen = false;
    if m == 0 || m > tokens.len() {
        return (None, false);
    }
    for i in 0..=tokens.len() - m {
        if tokens[i..i + m].iter().zip(words).all(|(t, w)| eq(t, w)) {
            if !taken[i..i + m].iter().any(|&b| b) {
                return (Some(i), true);
            }
            seen = true;
        }
    }
    (None, seen)
}

/// Places predictions on the target's tokens in reply order.
pub fn align(predictions: &[RawPrediction], target: &Document, labels: &LabelSet) -> AlignedPrediction {
    let tokens: Vec<&str> = target.surfaces().collect();
    let mut taken = vec![false; tokens.len()];
    let mut out = AlignedPrediction::default();
    for p in predictions {
        let Some(label) = labels.normalize(&p.label) else {
            out.dropped.push(DroppedPrediction {
                prediction: p.clone(),
                reason: DropReason::UnknownLabel,
            });
            continue;
        };
        let words: Vec<&str> = p.surface.split_whitespace().collect();
        let (exact, seen_exact) = find_free(&tokens, &words, &taken, |a, b| a == b);
        let (hit, seen) = match exact {
            Some(i) => (Some(i), true),
            None => {
                let (i, seen_fold) =
                    find_free(&tokens, &words, &taken, |a, b| a.to_lowercase() == b.to_lowercase());
                (i, seen_exact || seen_fold)
            }
        };
        match hit {
            Some(start) => {
                let end = start + words.len();
                taken[start..end].iter_mut().for_each(|b| *b = true);
                out.spans.push(EntitySpan::new(start, end, label));
            }
            None => out.dropped.push(DroppedPrediction {
                prediction: p.clone(),
                reason: if seen { DropReason::Overlap } else { DropReason::NoMatch },
            }),
        }
    }
    out.spans.sort();
    out
}
