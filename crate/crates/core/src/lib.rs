//! Measures how badly a similarity-based automated short-answer grader can be
//! gamed, then hardens it.
//!
//! The pipeline: load or synthesize a corpus of items and scored responses
//! ([`corpus`]), generate adversarial "gaming" responses ([`gaming`]), embed
//! texts ([`embedding`]), grade by nearest labeled reference above a
//! threshold ([`grader`]), combine graders ([`ensemble`]), measure F1/FPR per
//! provenance ([`metrics`]), orchestrate the evaluation protocols
//! ([`experiments`]), project response clouds ([`diagnostics`]), and score
//! with an external LLM judge under record/replay ([`llmjudge`]).

pub mod corpus;
pub mod diagnostics;
pub mod embedding;
pub mod ensemble;
pub mod experiments;
pub mod gaming;
pub mod grader;
pub mod llmjudge;
pub mod metrics;
pub mod text;

pub use corpus::{Corpus, GoldLabel, Item, Provenance, Response};
pub use embedding::{Embedder, EmbedderConfig, EmbeddingVector};
pub use grader::{Prediction, ReferenceIndex};
pub use metrics::MetricsReport;
