//! Rule-based stand-in for a language model, so the whole flow runs offline.
//! It answers purely from the request's [`TaskContext`] and is deterministic.

use std::collections::BTreeMap;

use serde_json::json;

use super::{Backend, BackendError, BackendKind, ModelRequest, Passage, TaskContext};
use crate::history::{self, Role};
use crate::lexicon;
use crate::text::{padded, terms};

/// How much a disease agent trusts its own reading of diseases outside its
/// specialty, relative to its own disease.
const OFF_SPECIALTY_FACTOR: f64 = 0.8;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "for", "of", "to", "in", "on", "and",
    "or", "what", "which", "how", "do", "does", "i", "my", "it", "this", "that", "with", "can",
    "should", "used", "use", "me", "about", "any", "there",
];

pub struct OfflineBackend {
    id: String,
}

impl OfflineBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }
}

impl Default for OfflineBackend {
    fn default() -> Self {
        Self::new("offline-rules")
    }
}

impl Backend for OfflineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ScriptedMock
    }

    fn send(&self, request: &ModelRequest) -> Result<String, BackendError> {
        let ctx = request.context.as_ref().ok_or_else(|| {
            BackendError::Rejected("offline backend needs a structured task context".into())
        })?;
        let out = match ctx {
            TaskContext::Classify { query, history } => {
                let last_system = history
                    .iter()
                    .rev()
                    .find(|t| t.role == Role::System)
                    .map(|t| t.text.as_str());
                let scores = lexicon::class_scores(query, last_system);
                serde_json::to_string(&scores).expect("scores serialize")
            }
            TaskContext::ExtractSymptoms { text } => {
                let facts: Vec<_> = lexicon::match_symptoms(text)
                    .into_iter()
                    .map(|e| json!({"category": e.category, "attribute": e.attribute, "value": e.value}))
                    .collect();
                json!({ "facts": facts }).to_string()
            }
            TaskContext::Opine {
                agent_disease,
                diseases,
                observations,
            } => {
                let scores: BTreeMap<String, f64> = diseases
                    .iter()
                    .map(|d| {
                        let base = lexicon::profile_score(d, observations);
                        let p = if d == agent_disease {
                            base
                        } else {
                            base * OFF_SPECIALTY_FACTOR
                        };
                        (d.code().to_string(), p)
                    })
                    .collect();
                serde_json::to_string(&scores).expect("scores serialize")
            }
            TaskContext::ExtractGeneral { text, .. } => {
                let entities: Vec<_> = lexicon::match_general_terms(text)
                    .into_iter()
                    .map(|e| json!({"term": e.term, "kind": e.kind}))
                    .collect();
                json!({ "entities": entities }).to_string()
            }
            TaskContext::ExtractMedical { text, .. } => {
                let entities: Vec<_> = lexicon::match_medical_terms(text)
                    .into_iter()
                    .map(|e| json!({"trade_name": e.trade_name, "group": e.group, "kind": e.kind}))
                    .collect();
                json!({ "entities": entities }).to_string()
            }
            TaskContext::RewriteGeneral {
                query,
                entities,
                history,
            } => {
                let mut out = query.clone();
                if !entities.is_empty() {
                    let list = entities
                        .iter()
                        .map(|e| format!("{} ({})", e.term, e.kind))
                        .collect::<Vec<_>>()
                        .join("; ");
                    out.push_str(&format!("\nContext: {list}."));
                }
                if !history.is_empty() {
                    out.push_str("\nConversation:\n");
                    out.push_str(&history::render(history));
                }
                out
            }
            TaskContext::RewriteMedical { query, entities } => {
                let list = entities
                    .iter()
                    .map(|e| {
                        let name = e
                            .trade_name
                            .as_deref()
                            .or(e.group.as_deref())
                            .unwrap_or("unnamed product");
                        let kind = match e.kind {
                            crate::pipeline::MedicalKind::Medicine => "medicine",
                            crate::pipeline::MedicalKind::Vaccine => "vaccine",
                        };
                        match (&e.trade_name, &e.group) {
                            (Some(_), Some(g)) => format!("{name} ({kind}, {g})"),
                            _ => format!("{name} ({kind})"),
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                format!("{query}\nProducts: {list}.")
            }
            TaskContext::Generate { query, passages } => extractive_answer(query, passages),
        };
        Ok(out)
    }
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?' | '\n') {
            let s = text[start..=i].trim();
            if s.chars().any(char::is_alphanumeric) {
                out.push(s);
            }
            start = i + c.len_utf8();
        }
    }
    let tail = text[start..].trim();
    if tail.chars().any(char::is_alphanumeric) {
        out.push(tail);
    }
    out
}

/// Picks up to three sentences with the highest content-word overlap with the
/// query, keeping document order, each tagged with its source.
fn extractive_answer(query: &str, passages: &[Passage]) -> String {
    let wanted: Vec<String> = terms(query)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect();
    let mut scored = Vec::new();
    for (pi, p) in passages.iter().enumerate() {
        for (si, s) in sentences(&p.text).into_iter().enumerate() {
            let padded_s = padded(s);
            let score = wanted
                .iter()
                .filter(|w| padded_s.contains(&format!(" {w} ")))
                .count();
            scored.push((score, pi, si, s));
        }
    }
    // Only sentences tied for the best overlap make the answer.
    let top = scored.iter().map(|x| x.0).max().unwrap_or(0);
    let mut best: Vec<_> = scored.iter().filter(|x| x.0 > 0 && x.0 == top).collect();
    best.truncate(3);
    if best.is_empty() {
        best = scored.iter().take(1).collect();
    }
    best.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)));
    let mut out = String::from("According to the retrieved documents:");
    for (_, pi, _, s) in best {
        let p = &passages[*pi];
        out.push_str(&format!("\n- {s} ({}, p. {})", p.source_file, p.page));
    }
    out
}
