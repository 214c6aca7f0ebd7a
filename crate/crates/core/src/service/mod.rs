//! The conversational service: sessions, the per-message orchestration and
//! the HTTP binding.

mod config;
mod engine;
mod http;
mod sessions;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{DialogueSession, SymptomReport};
use crate::disease::DiseaseId;
use crate::fusion::DiagnosisOutcome;
use crate::history::{Role, Turn};
use crate::router::QueryClass;

pub use config::{ApiConfig, BackendConfig, RouterConfig, StoreConfig};
pub use engine::{ClassifyResponse, Engine, EngineOptions, HealthInfo, TurnResponse};
pub use http::{router, serve};
pub use sessions::{SessionEvent, SessionLog};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Downstream(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DialoguePhase {
    Collecting,
    Confirming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTurn {
    pub role: Role,
    pub text: String,
    /// Class the turn was handled as (user turns only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<QueryClass>,
    /// Raw router output, when it differs from `class`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classified_as: Option<QueryClass>,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TurnError>,
}

impl SessionTurn {
    pub fn as_turn(&self) -> Turn {
        Turn {
            role: self.role,
            text: self.text.clone(),
        }
    }
}

/// Mutable per-session state outside the transcript.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// The current or most recent symptom dialogue.
    #[serde(default)]
    pub dialogue: Option<DialogueSession>,
    /// Set while a dialogue is active.
    #[serde(default)]
    pub dialogue_phase: Option<DialoguePhase>,
    #[serde(default)]
    pub last_report: Option<SymptomReport>,
    #[serde(default)]
    pub last_outcome: Option<DiagnosisOutcome>,
    /// Disease whose testing details were offered after a prediction.
    #[serde(default)]
    pub pending_offer: Option<DiseaseId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub created_ms: u64,
    pub turns: Vec<SessionTurn>,
    #[serde(flatten)]
    pub state: SessionState,
}

impl Session {
    pub fn new(session_id: String, created_ms: u64) -> Self {
        Self {
            session_id,
            created_ms,
            turns: Vec::new(),
            state: SessionState::default(),
        }
    }

    pub fn history(&self) -> Vec<Turn> {
        self.turns.iter().map(SessionTurn::as_turn).collect()
    }

    /// Classes of the user turns, in order.
    pub fn classes(&self) -> Vec<QueryClass> {
        self.turns
            .iter()
            .filter(|t| t.role == Role::User)
            .filter_map(|t| t.class)
            .collect()
    }

    /// User-turn classes with consecutive repeats collapsed.
    pub fn class_sequence(&self) -> Vec<QueryClass> {
        let mut out = self.classes();
        out.dedup();
        out
    }
}
