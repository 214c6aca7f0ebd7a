//! Four-way query classification and routing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{extract_json, Gateway, GatewayError, ModelRequest, Purpose, TaskContext};
use crate::history::{self, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryClass {
    /// Knowledge retrieval.
    K,
    /// Symptom-based diagnostic.
    D,
    /// To be clarified.
    T,
    /// General.
    G,
}

impl QueryClass {
    pub const ALL: [QueryClass; 4] = [QueryClass::K, QueryClass::D, QueryClass::T, QueryClass::G];

    /// Tie-break priority, highest first: the least committal route wins.
    pub const PRIORITY: [QueryClass; 4] =
        [QueryClass::G, QueryClass::T, QueryClass::D, QueryClass::K];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "k" | "knowledge" | "retrieval" | "knowledge retrieval" => Some(QueryClass::K),
            "d" | "diagnosis" | "diagnostic" => Some(QueryClass::D),
            "t" | "tbc" | "to-be-clarified" | "clarify" => Some(QueryClass::T),
            "g" | "general" => Some(QueryClass::G),
            _ => None,
        }
    }
}

impl fmt::Display for QueryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryClass::K => "K",
            QueryClass::D => "D",
            QueryClass::T => "T",
            QueryClass::G => "G",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouterError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("classifier backend unavailable: {0}")]
    BackendUnavailable(#[from] GatewayError),
    #[error("classifier returned malformed scores: {0}")]
    MalformedScores(String),
    #[error("classifier returned all-zero scores")]
    ZeroScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub probabilities: BTreeMap<QueryClass, f64>,
    pub chosen: QueryClass,
    pub raw_query: String,
}

impl ClassificationResult {
    /// Renormalizes raw non-negative scores by their sum and picks the argmax.
    /// Missing classes count as zero.
    pub fn from_scores(
        raw_query: impl Into<String>,
        scores: &BTreeMap<QueryClass, f64>,
    ) -> Result<Self, RouterError> {
        if let Some((c, v)) = scores.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(RouterError::MalformedScores(format!("{c} = {v}")));
        }
        let total: f64 = scores.values().sum();
        if total <= 0.0 {
            return Err(RouterError::ZeroScores);
        }
        let probabilities: BTreeMap<QueryClass, f64> = QueryClass::ALL
            .iter()
            .map(|c| (*c, scores.get(c).copied().unwrap_or(0.0) / total))
            .collect();
        let chosen = argmax(&probabilities);
        Ok(Self {
            probabilities,
            chosen,
            raw_query: raw_query.into(),
        })
    }
}

/// Argmax over the classes with ties broken by [`QueryClass::PRIORITY`].
pub fn argmax(probabilities: &BTreeMap<QueryClass, f64>) -> QueryClass {
    let mut best = QueryClass::PRIORITY[0];
    let mut best_p = f64::NEG_INFINITY;
    for c in QueryClass::PRIORITY {
        let p = probabilities.get(&c).copied().unwrap_or(0.0);
        if p > best_p {
            best = c;
            best_p = p;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteTarget {
    RecommendationPipeline,
    SymptomDialogue,
    ClarificationPrompt,
    GeneralReply,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub target: RouteTarget,
    pub rationale: String,
}

pub fn target_for(class: QueryClass) -> RouteTarget {
    match class {
        QueryClass::K => RouteTarget::RecommendationPipeline,
        QueryClass::D => RouteTarget::SymptomDialogue,
        QueryClass::T => RouteTarget::ClarificationPrompt,
        QueryClass::G => RouteTarget::GeneralReply,
    }
}

pub fn route(result: &ClassificationResult) -> RoutingDecision {
    let p = result.probabilities.get(&result.chosen).copied().unwrap_or(0.0);
    let why = match result.chosen {
        QueryClass::K => "knowledge query answered directly through retrieval",
        QueryClass::D => "symptom report starts stage-wise symptom collection",
        QueryClass::T => "ambiguous query needs clarification",
        QueryClass::G => "general conversation",
    };
    RoutingDecision {
        target: target_for(result.chosen),
        rationale: format!("class {} (p={p:.3}): {why}", result.chosen),
    }
}

pub const DEFAULT_HISTORY_WINDOW: usize = 6;

pub struct QueryRouter {
    gateway: Arc<Gateway>,
    history_window: usize,
}

impl QueryRouter {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self {
            gateway,
            history_window: DEFAULT_HISTORY_WINDOW,
        }
    }

    pub fn with_history_window(mut self, window: usize) -> Self {
        self.history_window = window;
        self
    }

    pub fn prompt(query: &str, history: &[Turn]) -> String {
        let mut prompt = String::from(
            "Classify the user's latest message in a pig-health assistant into one of four classes:\n\
             K = knowledge retrieval (prevention, vaccination, prescriptions, biosecurity),\n\
             D = symptom-based diagnostic (describes observed clinical signs),\n\
             T = to be clarified (ambiguous, vague or incomplete),\n\
             G = general (greetings, off-topic, broad farm talk).\n\
             Reply with JSON {\"K\": p, \"D\": p, \"T\": p, \"G\": p}.\n",
        );
        if !history.is_empty() {
            prompt.push_str("Conversation so far:\n");
            prompt.push_str(&history::render(history));
            prompt.push('\n');
        }
        prompt.push_str("Message: ");
        prompt.push_str(query);
        prompt
    }

    pub fn classify(&self, query: &str, history: &[Turn]) -> Result<ClassificationResult, RouterError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(RouterError::EmptyQuery);
        }
        let window = history::recent(history, self.history_window).to_vec();
        let request = ModelRequest::new(Purpose::Classify, Self::prompt(query, &window))?
            .with_parameter("temperature", 0.0)
            .with_context(TaskContext::Classify {
                query: query.to_string(),
                history: window,
            });
        let response = self.gateway.call(&request)?;
        let scores = parse_scores(&response.text)?;
        ClassificationResult::from_scores(query, &scores)
    }
}

fn parse_scores(text: &str) -> Result<BTreeMap<QueryClass, f64>, RouterError> {
    let value = extract_json(text).ok_or_else(|| RouterError::MalformedScores(text.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| RouterError::MalformedScores(text.to_string()))?;
    let mut scores = BTreeMap::new();
    for (k, v) in obj {
        let class = QueryClass::parse(k)
            .ok_or_else(|| RouterError::MalformedScores(format!("unknown class {k:?}")))?;
        let p = v
            .as_f64()
            .ok_or_else(|| RouterError::MalformedScores(format!("{k} is not a number")))?;
        scores.insert(class, p);
    }
    Ok(scores)
}
