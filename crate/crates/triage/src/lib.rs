//! Severity triage of radiology report text.
//!
//! The pipeline: load or synthesize a labeled corpus ([`corpus`]), clean
//! and tokenize it ([`preprocess`]), vectorize with TF-IDF ([`features`]),
//! then classify with nine classical algorithms ([`classifiers`]), a
//! few-shot contrastive-embedding model ([`fewshot`]), or an LLM prompting
//! baseline ([`llm`]). [`eval`] computes confusion-matrix metrics and runs
//! the full stage-by-balancing benchmark grid.

pub mod classifiers;
pub mod corpus;
pub mod error;
pub mod features;
pub mod preprocess;
pub mod seeding;

pub use error::{Error, Result};
