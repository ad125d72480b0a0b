//! Training-free named entity recognition on historical documents with a
//! prompted chat model: example retrieval, prompt rendering, reply parsing,
//! majority voting and strict/fuzzy entity-level scoring.

pub mod corpus;
pub mod llm_gateway;
pub mod prompting;
pub mod response;
pub mod retrieval;
pub mod runner;
pub mod scoring;
pub mod voting;

pub use corpus::{Dataset, Document, EntitySpan, IobTag, LabelSet, Split, Token};
