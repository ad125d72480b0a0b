//! Token-level majority voting over repeated runs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{repair_iob, IobTag};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VotingError {
    #[error("run {run_index} has {found} tags, expected {expected}")]
    LengthMismatch {
        run_index: u32,
        expected: usize,
        found: usize,
    },
    #[error("no runs to vote over")]
    NoRuns,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTags {
    pub doc_id: String,
    pub run_index: u32,
    pub tags: Vec<IobTag>,
}

/// Per token, the full IOB tag held by a strict majority of runs wins;
/// otherwise the token gets `O`. The result is then repaired to valid IOB
/// (a dangling `I-X` becomes `B-X`).
pub fn majority_vote(runs: &[RunTags], doc_len: usize) -> Result<Vec<IobTag>, VotingError> {
    if runs.is_empty() {
        return Err(VotingError::NoRuns);
    }
    for r in runs {
        if r.tags.len() != doc_len {
            return Err(VotingError::LengthMismatch {
                run_index: r.run_index,
                expected: doc_len,
                found: r.tags.len(),
            });
        }
    }
    let n = runs.len();
    let voted: Vec<IobTag> = (0..doc_len)
        .map(|i| {
            let mut counts: HashMap<&IobTag, usize> = HashMap::new();
            for r in runs {
                *counts.entry(&r.tags[i]).or_default() += 1;
            }
            counts
                .into_iter()
                .find(|&(_, c)| 2 * c > n)
                .map_or(IobTag::Outside, |(t, _)| t.clone())
        })
        .collect();
    Ok(repair_iob(&voted))
}
