//! Stage-wise symptom collection.
//!
//! A session walks the General / External / Specific states, asking one
//! question per state, and is capped at three user answers. The transition
//! table:
//!
//! | from | general | external | specific | missing-crucial |
//! |------|---------|----------|----------|-----------------|
//! | G    | E       | E        | S        | G               |
//! | E    | S       | S        | S        | E               |
//! | S    | S       | S        | S        | G if turns remain, else S |
//!
//! The initial complaint and the confirmation reply do not count as
//! exchanges.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{extract_json, Gateway, GatewayError, ModelRequest, Purpose, TaskContext};
use crate::lexicon::{self, Confirmation, CLUSTERS};
use crate::text::capitalize;

pub const MAX_EXCHANGES: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DialogueState {
    /// Broad indicators: mortality, pig class, environment.
    G,
    /// Visible signs: skin, discharge, behavior.
    E,
    /// Targeted symptom clusters.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymptomCategory {
    GeneralIndicator,
    ExternalSign,
    SpecificCluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomFact {
    pub category: SymptomCategory,
    pub attribute: String,
    pub value: String,
    pub source_turn: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Specificity {
    General,
    External,
    Specific,
    MissingCrucial,
}

impl Specificity {
    pub const ALL: [Specificity; 4] = [
        Specificity::General,
        Specificity::External,
        Specificity::Specific,
        Specificity::MissingCrucial,
    ];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DialogueError {
    #[error("the three-exchange limit has been reached")]
    TurnLimitReached,
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("session has neither facts nor an initial complaint")]
    EmptySession,
    #[error("session is not ready to finalize")]
    NotFinalizable,
    #[error("symptom extraction failed: {0}")]
    BackendUnavailable(#[from] GatewayError),
    #[error("symptom extraction returned malformed output: {0}")]
    MalformedExtraction(String),
}

/// One symptom-collection dialogue. `facts` is append-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSession {
    pub state: DialogueState,
    pub exchanges_used: u8,
    pub facts: Vec<SymptomFact>,
    pub confirmed: bool,
    /// Opening complaint text, kept for the summary when no facts were found.
    #[serde(default)]
    pub complaint: Option<String>,
    /// Set when the user said there is nothing more to add.
    #[serde(default)]
    pub finalizable: bool,
    /// Every state visited, starting with the initial one.
    #[serde(default)]
    pub trace: Vec<DialogueState>,
}

impl DialogueSession {
    pub fn new() -> Self {
        Self {
            state: DialogueState::G,
            exchanges_used: 0,
            facts: Vec::new(),
            confirmed: false,
            complaint: None,
            finalizable: false,
            trace: vec![DialogueState::G],
        }
    }

    pub fn turns_remaining(&self) -> u8 {
        MAX_EXCHANGES.saturating_sub(self.exchanges_used)
    }

    pub fn ready_to_finalize(&self) -> bool {
        self.finalizable || self.exchanges_used >= MAX_EXCHANGES
    }

    fn push_facts(&mut self, new: Vec<SymptomFact>) {
        for f in new {
            let dup = self
                .facts
                .iter()
                .any(|g| g.category == f.category && g.attribute == f.attribute && g.value == f.value);
            if !dup {
                self.facts.push(f);
            }
        }
    }

    fn has_general_indicator(&self) -> bool {
        self.facts
            .iter()
            .any(|f| f.category == SymptomCategory::GeneralIndicator)
    }

    /// Consumes one exchange graded `specificity` and applies the transition.
    pub fn step(&self, specificity: Specificity) -> Result<DialogueSession, DialogueError> {
        if self.exchanges_used >= MAX_EXCHANGES {
            return Err(DialogueError::TurnLimitReached);
        }
        let mut next = self.clone();
        next.exchanges_used += 1;
        let turns_remain = next.exchanges_used < MAX_EXCHANGES;
        next.state = transition(self.state, specificity, turns_remain);
        next.trace.push(next.state);
        Ok(next)
    }
}

impl Default for DialogueSession {
    fn default() -> Self {
        Self::new()
    }
}

pub fn transition(state: DialogueState, answer: Specificity, turns_remain: bool) -> DialogueState {
    use DialogueState::*;
    use Specificity::*;
    match (state, answer) {
        (G, General | External) => E,
        (G, Specific) => S,
        (E, General | External | Specific) => S,
        (S, MissingCrucial) if turns_remain => G,
        (s, _) => s,
    }
}

/// Grades an answer given in `state`. In S, having no general indicator at
/// all counts as crucial data missing, even if the answer named a cluster.
pub fn grade(state: DialogueState, new_facts: &[SymptomFact], session_has_general: bool) -> Specificity {
    if state == DialogueState::S && !session_has_general {
        return Specificity::MissingCrucial;
    }
    if new_facts
        .iter()
        .any(|f| f.category == SymptomCategory::SpecificCluster)
    {
        return Specificity::Specific;
    }
    match state {
        DialogueState::G => Specificity::General,
        DialogueState::E => Specificity::External,
        DialogueState::S => Specificity::Specific,
    }
}

pub fn next_question(session: &DialogueSession) -> Result<String, DialogueError> {
    if session.exchanges_used >= MAX_EXCHANGES {
        return Err(DialogueError::TurnLimitReached);
    }
    let q = match session.state {
        DialogueState::G => "Can you provide more details?\n\
             - How many pigs are affected?\n\
             - What is their age/type?\n\
             - Any recent changes in ventilation or weather?"
            .to_string(),
        DialogueState::E => "Do you see any visible signs?\n\
             - Skin lesions or color changes?\n\
             - Nasal or ocular discharge?\n\
             - Behavior changes such as refusal to stand or aggression?"
            .to_string(),
        DialogueState::S => {
            let hinted = session
                .facts
                .iter()
                .rev()
                .find_map(|f| lexicon::cluster_hint(&f.attribute, &f.value));
            match hinted.and_then(|h| CLUSTERS.iter().find(|(name, _)| *name == h)) {
                Some((_, desc)) => format!("Are there any {desc}? Please describe them."),
                None => {
                    let all = CLUSTERS
                        .iter()
                        .map(|(_, d)| format!("- {}", capitalize(d)))
                        .collect::<Vec<_>>()
                        .join("\n");
                    format!("Have you noticed any of these?\n{all}")
                }
            }
        }
    };
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomReport {
    pub facts: Vec<SymptomFact>,
    pub summary: String,
    pub user_confirmed: bool,
    pub truncated: bool,
}

pub fn finalize(session: &DialogueSession, force: bool) -> Result<SymptomReport, DialogueError> {
    if !force && !session.ready_to_finalize() {
        return Err(DialogueError::NotFinalizable);
    }
    let complaint = session
        .complaint
        .as_deref()
        .map(str::trim)
        .filter(|c| !c.is_empty());
    if session.facts.is_empty() && complaint.is_none() {
        return Err(DialogueError::EmptySession);
    }
    let mut summary = String::from("Summary:");
    if session.facts.is_empty() {
        summary.push_str(&format!("\n- {}", complaint.unwrap_or_default()));
    }
    for f in &session.facts {
        summary.push_str(&format!("\n- {}", capitalize(&f.value)));
    }
    summary.push_str("\nIs this correct?");
    Ok(SymptomReport {
        facts: session.facts.clone(),
        summary,
        user_confirmed: session.confirmed,
        truncated: session.exchanges_used >= MAX_EXCHANGES && !session.finalizable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfirmationOutcome {
    Confirmed,
    /// Rejected with turns left: collection resumes.
    Reopened,
    /// Rejected with no turns left: facts pass through unconfirmed.
    PassThrough,
    Unclear,
}

pub fn apply_confirmation(session: &DialogueSession, reply: &str) -> (DialogueSession, ConfirmationOutcome) {
    let mut next = session.clone();
    let outcome = match lexicon::confirmation(reply) {
        Confirmation::Affirmed => {
            next.confirmed = true;
            ConfirmationOutcome::Confirmed
        }
        Confirmation::Rejected if session.turns_remaining() > 0 => {
            next.confirmed = false;
            next.finalizable = false;
            ConfirmationOutcome::Reopened
        }
        Confirmation::Rejected => {
            next.confirmed = false;
            ConfirmationOutcome::PassThrough
        }
        Confirmation::Unclear => ConfirmationOutcome::Unclear,
    };
    (next, outcome)
}

/// Gateway-assisted fact extraction plus the session operations that need it.
pub struct SymptomCollector {
    gateway: Arc<Gateway>,
}

#[derive(Deserialize)]
struct ExtractedFact {
    category: SymptomCategory,
    attribute: String,
    value: String,
}

impl SymptomCollector {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self { gateway }
    }

    pub fn prompt(text: &str) -> String {
        format!(
            "Extract pig-health symptom facts from the farmer's message. Categories: \
             general-indicator (mortality/morbidity rates, pig class, environment), \
             external-sign (skin lesions, color changes, discharge, behavior), \
             specific-cluster (respiratory, gastrointestinal, neurological, reproductive). \
             Reply with JSON {{\"facts\": [{{\"category\", \"attribute\", \"value\"}}]}}.\n\
             Message: {text}"
        )
    }

    pub fn extract_facts(&self, text: &str, turn: u8) -> Result<Vec<SymptomFact>, DialogueError> {
        let request = ModelRequest::new(Purpose::Extract, Self::prompt(text))?
            .with_context(TaskContext::ExtractSymptoms { text: text.to_string() });
        let response = self.gateway.call(&request)?;
        let value = extract_json(&response.text)
            .ok_or_else(|| DialogueError::MalformedExtraction(response.text.clone()))?;
        let facts: Vec<ExtractedFact> = serde_json::from_value(value["facts"].clone())
            .map_err(|e| DialogueError::MalformedExtraction(e.to_string()))?;
        Ok(facts
            .into_iter()
            .map(|f| SymptomFact {
                category: f.category,
                attribute: f.attribute,
                value: f.value,
                source_turn: turn,
            })
            .collect())
    }

    /// Opens a session from the initial complaint. A complaint that already
    /// names a symptom cluster moves straight from G to S.
    pub fn start(&self, complaint: &str) -> Result<DialogueSession, DialogueError> {
        let mut session = DialogueSession::new();
        let complaint = complaint.trim();
        if !complaint.is_empty() {
            session.complaint = Some(complaint.to_string());
            let facts = self.extract_facts(complaint, 0)?;
            let specific = grade(DialogueState::G, &facts, true) == Specificity::Specific;
            session.push_facts(facts);
            if specific {
                session.state = transition(DialogueState::G, Specificity::Specific, true);
                session.trace.push(session.state);
            }
        }
        Ok(session)
    }

    pub fn ingest_answer(
        &self,
        session: &DialogueSession,
        answer: &str,
    ) -> Result<DialogueSession, DialogueError> {
        if session.exchanges_used >= MAX_EXCHANGES {
            return Err(DialogueError::TurnLimitReached);
        }
        let answer = answer.trim();
        if answer.is_empty() {
            return Err(DialogueError::EmptyAnswer);
        }
        let turn = session.exchanges_used + 1;
        if lexicon::is_no_more_information(answer) {
            let specificity = grade(session.state, &[], session.has_general_indicator());
            let mut next = session.step(specificity)?;
            next.finalizable = true;
            return Ok(next);
        }
        let new_facts = self.extract_facts(answer, turn)?;
        let mut with_facts = session.clone();
        with_facts.push_facts(new_facts.clone());
        let specificity = grade(session.state, &new_facts, with_facts.has_general_indicator());
        with_facts.step(specificity)
    }
}
