//! Per-message orchestration: classify, route, run the selected component and
//! record the exchange.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::dialogue::{
    apply_confirmation, finalize, next_question, ConfirmationOutcome, DialogueError, DialogueSession,
    DialogueState, SymptomCollector, SymptomReport,
};
use crate::disease::{DiseaseId, DiseaseRegistry};
use crate::fusion::{
    escalate, fuse, predict_with, DiagnosisOutcome, EscalationAction, FusionConfig, FusionError,
    OpinionGatherer,
};
use crate::gateway::{Gateway, GatewayError, HostedBackend, OfflineBackend, ScriptedBackend};
use crate::history::{self, Role, Turn};
use crate::lexicon::{self, Confirmation};
use crate::pipeline::{PipelineConfig, PipelineError, RecommendationOutput, RecommendationPipeline};
use crate::router::{target_for, QueryClass, QueryRouter, RouteTarget, RouterError};
use crate::store::{HashingEmbedder, KnowledgeStore, StoreError};

use super::{
    ApiConfig, BackendConfig, DialoguePhase, ServiceError, Session, SessionEvent, SessionLog,
    SessionState, SessionTurn, TurnError,
};

const GREETING_REPLY: &str = "Hello! How can I assist you with pig care?";
const GENERAL_REPLY: &str =
    "I can help with pig health: disease diagnosis from symptoms, and information on diseases, vaccines and treatments.";
const CLARIFY_REPLY: &str = "I see. Are you looking for:\n- Disease diagnosis? or General pig disease info?";
const ERROR_REPLY: &str = "Sorry, I could not process that right now. Please try again.";

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub seed: u64,
    pub history_window: usize,
    pub fusion: FusionConfig,
    pub pipeline: PipelineConfig,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            history_window: crate::router::DEFAULT_HISTORY_WINDOW,
            fusion: FusionConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub session_id: String,
    pub class: QueryClass,
    /// Raw router output, when the turn was handled as a different class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classified_as: Option<QueryClass>,
    pub target: RouteTarget,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_state: Option<DialogueState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchanges_used: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<DiagnosisOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escalation: Option<EscalationAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<RecommendationOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TurnError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub probabilities: BTreeMap<QueryClass, f64>,
    pub chosen: QueryClass,
    pub target: RouteTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthInfo {
    pub status: String,
    pub backend: Option<String>,
    pub documents: usize,
    pub sessions: usize,
}

struct Slot {
    /// Serializes posts to one session.
    post: Mutex<()>,
    current: RwLock<Arc<Session>>,
}

/// What handling one message produced, before it is recorded.
struct Handled {
    class: QueryClass,
    reply: String,
    state: SessionState,
    outcome: Option<DiagnosisOutcome>,
    escalation: Option<EscalationAction>,
    recommendation: Option<RecommendationOutput>,
}

#[derive(Debug)]
struct Failure {
    class: QueryClass,
    error: TurnError,
}

fn failure(class: QueryClass, kind: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        class,
        error: TurnError {
            kind: kind.into(),
            message: e.to_string(),
        },
    }
}

fn dialogue_failure(e: DialogueError) -> Failure {
    let kind = match e {
        DialogueError::BackendUnavailable(_) => "backend_unavailable",
        DialogueError::MalformedExtraction(_) => "malformed_output",
        _ => "dialogue",
    };
    failure(QueryClass::D, kind, e)
}

fn fusion_failure(e: FusionError) -> Failure {
    let kind = match e {
        FusionError::AgentFailed { .. } => "backend_unavailable",
        FusionError::MalformedOpinion { .. } => "malformed_output",
        _ => "fusion",
    };
    failure(QueryClass::D, kind, e)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let kind = match e {
        PipelineError::EmptyQuery => "invalid_request",
        PipelineError::EmptyStore => "empty_store",
        PipelineError::BackendUnavailable(_) => "backend_unavailable",
        PipelineError::RetriesExhausted(_) => "retries_exhausted",
        PipelineError::Malformed(_) => "malformed_output",
        PipelineError::Store(_) => "store",
    };
    failure(QueryClass::K, kind, e)
}

fn router_failure(e: RouterError) -> Failure {
    let kind = match e {
        RouterError::EmptyQuery => "invalid_request",
        RouterError::BackendUnavailable(_) => "backend_unavailable",
        RouterError::MalformedScores(_) | RouterError::ZeroScores => "malformed_output",
    };
    failure(QueryClass::G, kind, e)
}

/// "A", "A and B", "A, B, and C".
fn join_list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

pub struct Engine {
    clock: Arc<dyn Clock>,
    gateway: Arc<Gateway>,
    router: QueryRouter,
    collector: SymptomCollector,
    gatherer: OpinionGatherer,
    fusion: FusionConfig,
    pipeline: RecommendationPipeline,
    log: SessionLog,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    ids: Mutex<ChaCha8Rng>,
}

impl Engine {
    /// Builds an engine and replays any sessions already in `log`.
    pub fn new(
        gateway: Arc<Gateway>,
        store: Arc<KnowledgeStore>,
        log: SessionLog,
        options: EngineOptions,
    ) -> Result<Self, ServiceError> {
        options
            .fusion
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let registry = DiseaseRegistry::default();
        let mut sessions = BTreeMap::new();
        for s in log.load_all()? {
            sessions.insert(
                s.session_id.clone(),
                Arc::new(Slot {
                    post: Mutex::new(()),
                    current: RwLock::new(Arc::new(s)),
                }),
            );
        }
        Ok(Self {
            clock: gateway.clock().clone(),
            router: QueryRouter::new(gateway.clone()).with_history_window(options.history_window),
            collector: SymptomCollector::new(gateway.clone()),
            gatherer: OpinionGatherer::new(gateway.clone(), registry, options.fusion.weights.clone()),
            fusion: options.fusion,
            pipeline: RecommendationPipeline::new(gateway.clone(), store, options.pipeline, options.seed),
            gateway,
            log,
            sessions: RwLock::new(sessions),
            ids: Mutex::new(ChaCha8Rng::seed_from_u64(options.seed)),
        })
    }

    pub fn from_config(config: &ApiConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        config.validate()?;
        let gateway = Arc::new(build_gateway(&config.backend, clock, config)?);
        let embedder = HashingEmbedder::new(config.store.dimension).map_err(store_config)?;
        let store = KnowledgeStore::open(&config.store.path, Arc::new(embedder), config.store.chunking)
            .map_err(|e| match e {
                StoreError::Io(_) => ServiceError::StorageFailure(e.to_string()),
                other => store_config(other),
            })?;
        let log = SessionLog::open(&config.store.sessions_dir())?;
        Self::new(
            gateway,
            Arc::new(store),
            log,
            EngineOptions {
                seed: config.seed,
                history_window: config.router.history_window,
                fusion: config.fusion.clone(),
                pipeline: config.pipeline.clone(),
            },
        )
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn store(&self) -> &Arc<KnowledgeStore> {
        self.pipeline.store()
    }

    pub fn create_session(&self) -> Result<Session, ServiceError> {
        let mut sessions = self.sessions.write();
        let id = {
            let mut rng = self.ids.lock();
            loop {
                let id = format!("s-{:016x}", rng.next_u64());
                if !sessions.contains_key(&id) {
                    break id;
                }
            }
        };
        let session = Session::new(id.clone(), self.clock.now_ms());
        self.log.append(
            &id,
            &[SessionEvent::Created {
                session_id: id.clone(),
                created_ms: session.created_ms,
            }],
        )?;
        sessions.insert(
            id,
            Arc::new(Slot {
                post: Mutex::new(()),
                current: RwLock::new(Arc::new(session.clone())),
            }),
        );
        Ok(session)
    }

    pub fn get_session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        Ok(self.slot(id)?.current.read().clone())
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// Handles one user message. A downstream failure is reported in the
    /// response and leaves the session state as it was; the exchange is
    /// still recorded.
    pub fn post_message(&self, session_id: &str, text: &str) -> Result<TurnResponse, ServiceError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ServiceError::InvalidRequest("message text is empty".into()));
        }
        let slot = self.slot(session_id)?;
        let _guard = slot.post.lock();
        let session = slot.current.read().clone();

        let user_ms = self.clock.now_ms();
        let result = self.handle(&session, text);
        let system_ms = self.clock.now_ms();

        let (raw, handled) = match result {
            Ok((raw, h)) => (raw, Ok(h)),
            Err((raw, f)) => (raw, Err(f)),
        };
        let class = match &handled {
            Ok(h) => h.class,
            Err(f) => f.class,
        };
        let classified_as = raw.filter(|r| *r != class);
        let user_turn = SessionTurn {
            role: Role::User,
            text: text.to_string(),
            class: Some(class),
            classified_as,
            timestamp_ms: user_ms,
            error: None,
        };

        let mut next = (*session).clone();
        let response = match handled {
            Ok(h) => {
                next.state = h.state;
                TurnResponse {
                    session_id: session_id.to_string(),
                    class,
                    classified_as,
                    target: target_for(class),
                    reply: h.reply,
                    dialogue_state: next.state.dialogue_phase.and(next.state.dialogue.as_ref().map(|d| d.state)),
                    exchanges_used: next.state.dialogue.as_ref().map(|d| d.exchanges_used),
                    outcome: h.outcome,
                    escalation: h.escalation,
                    recommendation: h.recommendation,
                    error: None,
                }
            }
            Err(f) => {
                log::warn!("session {session_id}: {}: {}", f.error.kind, f.error.message);
                TurnResponse {
                    session_id: session_id.to_string(),
                    class,
                    classified_as,
                    target: target_for(class),
                    reply: ERROR_REPLY.to_string(),
                    dialogue_state: None,
                    exchanges_used: None,
                    outcome: None,
                    escalation: None,
                    recommendation: None,
                    error: Some(f.error),
                }
            }
        };
        let system_turn = SessionTurn {
            role: Role::System,
            text: response.reply.clone(),
            class: None,
            classified_as: None,
            timestamp_ms: system_ms,
            error: response.error.clone(),
        };
        next.turns.push(user_turn.clone());
        next.turns.push(system_turn.clone());
        self.log.append(
            session_id,
            &[
                SessionEvent::Turn { turn: user_turn },
                SessionEvent::Turn { turn: system_turn },
                SessionEvent::State {
                    state: Box::new(next.state.clone()),
                },
            ],
        )?;
        *slot.current.write() = Arc::new(next);
        Ok(response)
    }

    /// Returns the raw router class (if classification ran) with the result.
    #[allow(clippy::type_complexity)]
    fn handle(
        &self,
        session: &Session,
        text: &str,
    ) -> Result<(Option<QueryClass>, Handled), (Option<QueryClass>, Failure)> {
        let history = session.history();
        let classified = self
            .router
            .classify(text, &history)
            .map_err(|e| (None, router_failure(e)))?;
        let raw = classified.chosen;
        let state = &session.state;

        let result = if let Some(offer) = state
            .pending_offer
            .clone()
            .filter(|_| lexicon::confirmation(text) == Confirmation::Affirmed)
        {
            self.accept_offer(state, &offer, &history)
        } else if let Some(phase) = state.dialogue_phase {
            self.continue_dialogue(state, phase, text)
        } else {
            match raw {
                QueryClass::G => Ok(self.general_reply(state, text)),
                QueryClass::T => Ok(Handled {
                    class: QueryClass::T,
                    reply: CLARIFY_REPLY.into(),
                    state: SessionState {
                        pending_offer: None,
                        ..state.clone()
                    },
                    outcome: None,
                    escalation: None,
                    recommendation: None,
                }),
                QueryClass::D => self.start_dialogue(session, text),
                QueryClass::K => self.recommend_turn(state, None, text, &history),
            }
        };
        result.map(|h| (Some(raw), h)).map_err(|f| (Some(raw), f))
    }

    fn general_reply(&self, state: &SessionState, text: &str) -> Handled {
        let reply = if lexicon::is_greeting(text) {
            GREETING_REPLY
        } else {
            GENERAL_REPLY
        };
        Handled {
            class: QueryClass::G,
            reply: reply.into(),
            state: SessionState {
                pending_offer: None,
                ..state.clone()
            },
            outcome: None,
            escalation: None,
            recommendation: None,
        }
    }

    /// A clarification answer carries no symptoms itself, so the user text
    /// that prompted the clarification is folded into the complaint.
    fn start_dialogue(&self, session: &Session, text: &str) -> Result<Handled, Failure> {
        let mut complaint = text.to_string();
        let turns = &session.turns;
        if let [.., prev_user, prev_system] = turns.as_slice() {
            if prev_user.role == Role::User
                && prev_user.class == Some(QueryClass::T)
                && prev_system.error.is_none()
            {
                complaint = format!("{} {}", prev_user.text, text);
            }
        }
        let dialogue = self.collector.start(&complaint).map_err(dialogue_failure)?;
        self.collecting(SessionState::default(), dialogue, "Interesting. ")
    }

    /// Asks the next question, or summarizes once the dialogue can finalize.
    fn collecting(
        &self,
        base: SessionState,
        dialogue: DialogueSession,
        lead: &str,
    ) -> Result<Handled, Failure> {
        let (reply, phase, report) = if dialogue.ready_to_finalize() {
            let report = finalize(&dialogue, false).map_err(dialogue_failure)?;
            (format!("Understood. {}", report.summary), DialoguePhase::Confirming, Some(report))
        } else {
            let q = next_question(&dialogue).map_err(dialogue_failure)?;
            (format!("{lead}{q}"), DialoguePhase::Collecting, None)
        };
        Ok(Handled {
            class: QueryClass::D,
            reply,
            state: SessionState {
                dialogue: Some(dialogue),
                dialogue_phase: Some(phase),
                last_report: report.or(base.last_report),
                last_outcome: base.last_outcome,
                pending_offer: None,
            },
            outcome: None,
            escalation: None,
            recommendation: None,
        })
    }

    fn continue_dialogue(
        &self,
        state: &SessionState,
        phase: DialoguePhase,
        text: &str,
    ) -> Result<Handled, Failure> {
        let dialogue = state.dialogue.clone().unwrap_or_default();
        match phase {
            DialoguePhase::Collecting => {
                let next = self
                    .collector
                    .ingest_answer(&dialogue, text)
                    .map_err(dialogue_failure)?;
                self.collecting(state.clone(), next, "")
            }
            DialoguePhase::Confirming => {
                let (next, outcome) = apply_confirmation(&dialogue, text);
                match outcome {
                    ConfirmationOutcome::Confirmed | ConfirmationOutcome::PassThrough => {
                        let report = finalize(&next, true).map_err(dialogue_failure)?;
                        self.diagnose(next, report)
                    }
                    ConfirmationOutcome::Reopened => {
                        let q = next_question(&next).map_err(dialogue_failure)?;
                        Ok(Handled {
                            class: QueryClass::D,
                            reply: format!("Let's correct that. {q}"),
                            state: SessionState {
                                dialogue: Some(next),
                                dialogue_phase: Some(DialoguePhase::Collecting),
                                ..state.clone()
                            },
                            outcome: None,
                            escalation: None,
                            recommendation: None,
                        })
                    }
                    ConfirmationOutcome::Unclear => {
                        let summary = state
                            .last_report
                            .as_ref()
                            .map(|r| r.summary.clone())
                            .unwrap_or_default();
                        Ok(Handled {
                            class: QueryClass::D,
                            reply: format!("Please answer yes or no. {summary}"),
                            state: state.clone(),
                            outcome: None,
                            escalation: None,
                            recommendation: None,
                        })
                    }
                }
            }
        }
    }

    fn diagnose(
        &self,
        dialogue: DialogueSession,
        report: SymptomReport,
    ) -> Result<Handled, Failure> {
        let mut observations: Vec<String> = report.facts.iter().map(|f| f.value.clone()).collect();
        if observations.is_empty() {
            observations.extend(dialogue.complaint.clone());
        }
        let opinions = self.gatherer.gather(&observations).map_err(fusion_failure)?;
        let fused = fuse(&opinions).map_err(fusion_failure)?;
        let outcome = predict_with(&fused, self.fusion.tau, &self.fusion.tiers);

        let mut reply = String::from("Based on the symptoms:");
        let mut escalation = None;
        if outcome.ood {
            let codes: Vec<&str> = outcome.ranking.iter().map(|(d, _)| d.code()).collect();
            reply.push_str(&format!("\n- {} are unlikely.", join_list(&codes)));
            if let Some((top, _)) = outcome.ranking.first().filter(|(_, c)| *c > 0.0) {
                reply.push_str(&format!("\n- There is a small chance of {}.", top.code()));
            }
            let action = escalate(&outcome, "").map_err(fusion_failure)?;
            reply.push('\n');
            reply.push_str(&action.instructions);
            escalation = Some(escalate(&outcome, &summary_lines(&report)).map_err(fusion_failure)?);
        } else {
            for (d, c) in outcome
                .ranking
                .iter()
                .filter(|(d, _)| outcome.fused.prediction_set.contains(d))
            {
                let tier = outcome.fused.tiers[d].label();
                reply.push_str(&format!("\n- {}: {tier} confidence ({c:.2}).", d.code()));
            }
        }
        let offer = outcome
            .ranking
            .first()
            .filter(|(_, c)| *c > 0.0)
            .map(|(d, _)| d.clone());
        if let Some(d) = &offer {
            reply.push_str(&format!("\nWould you like details on {} testing?", d.code()));
        }
        let mut dialogue = dialogue;
        dialogue.confirmed = report.user_confirmed || dialogue.confirmed;
        Ok(Handled {
            class: QueryClass::D,
            reply,
            state: SessionState {
                dialogue: Some(dialogue),
                dialogue_phase: None,
                last_report: Some(report),
                last_outcome: Some(outcome.clone()),
                pending_offer: offer,
            },
            outcome: Some(outcome),
            escalation,
            recommendation: None,
        })
    }

    fn accept_offer(&self, state: &SessionState, disease: &DiseaseId, history: &[Turn]) -> Result<Handled, Failure> {
        let query = format!("{} testing", disease.code());
        self.recommend_turn(state, Some(disease.clone()), &query, history)
    }

    fn recommend_turn(
        &self,
        state: &SessionState,
        diagnosis: Option<DiseaseId>,
        query: &str,
        history: &[Turn],
    ) -> Result<Handled, Failure> {
        let window = history::recent(history, self.pipeline.config().history_window);
        let out = self
            .pipeline
            .run(diagnosis, query, window)
            .map_err(pipeline_failure)?;
        let mut reply = out.answer.clone();
        if let Some(c) = out.citations.first() {
            reply.push_str(&format!("\nWould you like to read more? ({})", c.source_file));
        }
        Ok(Handled {
            class: QueryClass::K,
            reply,
            state: SessionState {
                pending_offer: None,
                ..state.clone()
            },
            outcome: None,
            escalation: None,
            recommendation: Some(out),
        })
    }

    pub fn classify(&self, query: &str, history: &[Turn]) -> Result<ClassifyResponse, ServiceError> {
        let r = self.router.classify(query, history).map_err(|e| match e {
            RouterError::EmptyQuery => ServiceError::InvalidRequest(e.to_string()),
            other => ServiceError::Downstream(other.to_string()),
        })?;
        Ok(ClassifyResponse {
            target: target_for(r.chosen),
            probabilities: r.probabilities,
            chosen: r.chosen,
        })
    }

    pub fn recommend(
        &self,
        diagnosis: Option<&str>,
        query: &str,
        history: &[Turn],
    ) -> Result<RecommendationOutput, ServiceError> {
        let diagnosis = diagnosis
            .map(|d| DiseaseId::new(d).map_err(|e| ServiceError::InvalidRequest(e.to_string())))
            .transpose()?;
        self.pipeline.run(diagnosis, query, history).map_err(|e| match e {
            PipelineError::EmptyQuery => ServiceError::InvalidRequest(e.to_string()),
            other => ServiceError::Downstream(other.to_string()),
        })
    }

    pub fn health(&self) -> HealthInfo {
        HealthInfo {
            status: "ok".into(),
            backend: self.gateway.selected_backend(),
            documents: self.store().len(),
            sessions: self.session_count(),
        }
    }
}

fn summary_lines(report: &SymptomReport) -> String {
    report
        .summary
        .lines()
        .filter(|l| l.starts_with("- "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn store_config(e: StoreError) -> ServiceError {
    ServiceError::Config(e.to_string())
}

fn build_gateway(
    backend: &BackendConfig,
    clock: Arc<dyn Clock>,
    config: &ApiConfig,
) -> Result<Gateway, ServiceError> {
    let gateway = Gateway::new(clock, config.backoff);
    let gw_err = |e: GatewayError| ServiceError::Config(e.to_string());
    let offline: Arc<OfflineBackend> = Arc::new(OfflineBackend::default());
    match backend {
        BackendConfig::Offline {} => gateway.register_backend(offline).map_err(gw_err)?,
        BackendConfig::Scripted { fixtures } => {
            let scripted = ScriptedBackend::new("scripted")
                .with_fixture_file(fixtures)
                .map_err(gw_err)?
                .with_fallback(offline);
            gateway.register_backend(Arc::new(scripted)).map_err(gw_err)?;
        }
        BackendConfig::Hosted { model, .. } => {
            let hosted = backend.hosted_config().expect("hosted backend config");
            gateway
                .register_backend(Arc::new(HostedBackend::new(format!("hosted:{model}"), hosted)))
                .map_err(gw_err)?;
        }
    }
    Ok(gateway)
}
