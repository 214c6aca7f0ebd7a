//! Diagnostic dialogue orchestration for swine health.
//!
//! A user message is classified into one of four query classes and routed:
//! knowledge questions go through the retrieval-augmented recommendation
//! pipeline, symptom reports drive a bounded three-exchange collection dialogue
//! whose result is scored by several disease agents and fused into tiered
//! predictions (with out-of-distribution escalation), ambiguous inputs get a
//! clarification prompt and general chatter a general reply.
//!
//! Every model call goes through [`gateway::Gateway`], which applies a
//! five-attempt exponential backoff and can be backed by a deterministic
//! offline backend, so the whole flow runs without network access.
//!
//! The [`eval`] module recomputes classification, top-k diagnosis and rubric
//! metrics from raw fixtures, plus paired t-tests with subsample bootstrapping.

pub mod clock;
pub mod dialogue;
pub mod disease;
pub mod eval;
pub mod fusion;
pub mod gateway;
pub mod history;
pub mod lexicon;
pub mod pipeline;
pub mod router;
pub mod service;
pub mod store;
pub mod text;

pub use clock::{Clock, ManualClock, SystemClock};
pub use disease::{DiseaseId, DiseaseRegistry};
pub use history::{Role, Turn};
