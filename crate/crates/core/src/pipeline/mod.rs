//! Retrieval-augmented recommendation flow.
//!
//! Stages run in a fixed order: register, extract general entities, extract
//! medical entities, contextualize (two rewrites), retrieve, generate,
//! assemble. Every model call goes through the gateway's backoff.

mod entities;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::disease::DiseaseId;
use crate::gateway::{
    extract_json, BackendError, Gateway, GatewayError, ModelRequest, Passage, Purpose, TaskContext,
};
use crate::history::{self, Turn};
use crate::lexicon;
use crate::router::DEFAULT_HISTORY_WINDOW;
use crate::store::{
    build_filter, FilterContext, FilterExpression, KnowledgeStore, RetrievalHit, StoreError,
};

pub use entities::{EntitySet, GeneralEntity, MedicalEntity, MedicalKind};

pub const REFUSAL_TEMPLATE: &str = "Sorry, I cannot provide information on this topic. However, I can assist with swine diseases, vaccine diagnostics, or treatments";

pub const STAGES: [&str; 7] = [
    "register",
    "extract_general",
    "extract_medical",
    "contextualize",
    "retrieve",
    "generate",
    "assemble",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("knowledge store is empty")]
    EmptyStore,
    #[error("model backend unavailable: {0}")]
    BackendUnavailable(GatewayError),
    #[error("generation failed after {} attempts", .0.len())]
    RetriesExhausted(Vec<BackendError>),
    #[error("model returned malformed output: {0}")]
    Malformed(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<GatewayError> for PipelineError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::RetriesExhausted(errs) => PipelineError::RetriesExhausted(errs),
            other => PipelineError::BackendUnavailable(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub k: usize,
    pub history_window: usize,
    pub refusal_template: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 4,
            history_window: DEFAULT_HISTORY_WINDOW,
            refusal_template: REFUSAL_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub task_id: String,
    pub diagnosis: Option<DiseaseId>,
    pub query: String,
    pub history: Vec<Turn>,
    pub metadata: BTreeMap<String, Value>,
    pub filter: FilterExpression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextualizedQuery {
    pub original: String,
    pub stage1: String,
    pub stage2: String,
    #[serde(rename = "final")]
    pub final_query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub source_file: String,
    pub page: u32,
    pub chunk_index: u32,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationOutput {
    pub task_id: String,
    pub answer: String,
    pub citations: Vec<Citation>,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedAnswer {
    pub text: String,
    /// Gateway attempts for the generation call; 0 for a refusal.
    pub attempts: u32,
    pub backend_id: Option<String>,
}

/// Deterministic task ids: the seed plus a per-pipeline counter.
struct TaskIds {
    seed: u64,
    next: AtomicU64,
}

impl TaskIds {
    fn issue(&self) -> String {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        format!("task-{:08x}-{n:06}", self.seed & 0xffff_ffff)
    }
}

pub struct RecommendationPipeline {
    gateway: Arc<Gateway>,
    store: Arc<KnowledgeStore>,
    config: PipelineConfig,
    ids: TaskIds,
}

#[derive(Deserialize)]
struct EntityReply<T> {
    entities: Vec<T>,
}

impl RecommendationPipeline {
    pub fn new(gateway: Arc<Gateway>, store: Arc<KnowledgeStore>, config: PipelineConfig, seed: u64) -> Self {
        Self {
            gateway,
            store,
            config,
            ids: TaskIds {
                seed,
                next: AtomicU64::new(1),
            },
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<KnowledgeStore> {
        &self.store
    }

    fn now(&self) -> u64 {
        self.gateway.clock().now_ms()
    }

    /// An explicit diagnosis selects disease documents. Without one, a
    /// medicine or vaccine query selects vaccine documents, and a query
    /// naming exactly one disease selects that disease's documents.
    pub fn register(
        &self,
        diagnosis: Option<DiseaseId>,
        query: &str,
        history: &[Turn],
    ) -> Result<TaskState, PipelineError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let mut ctx = FilterContext {
            diagnosis: diagnosis.clone(),
            ..Default::default()
        };
        if ctx.diagnosis.is_none() {
            if lexicon::is_vaccine_flavored(query) {
                ctx.medical = true;
            } else if let [only] = lexicon::mentioned_diseases(query).as_slice() {
                ctx.diagnosis = Some(only.clone());
            }
        }
        let mut metadata = BTreeMap::new();
        metadata.insert("registered_ms".to_string(), json!(self.now()));
        Ok(TaskState {
            task_id: self.ids.issue(),
            diagnosis,
            query: query.to_string(),
            history: history.to_vec(),
            metadata,
            filter: build_filter(&ctx),
        })
    }

    fn window<'a>(&self, history: &'a [Turn]) -> &'a [Turn] {
        history::recent(history, self.config.history_window)
    }

    pub fn extract_general_entities(&self, text: &str, history: &[Turn]) -> Result<Vec<GeneralEntity>, PipelineError> {
        let prompt = format!(
            "List the veterinary terms in the message, including farm jargon such as \
             \"Roll Over\" (a swine health status transition). Reply with JSON \
             {{\"entities\": [{{\"term\", \"kind\"}}]}}.\nConversation:\n{}\nMessage: {text}",
            history::render(self.window(history))
        );
        let request = ModelRequest::new(Purpose::Extract, prompt)?
            .with_parameter("temperature", 0.0)
            .with_context(TaskContext::ExtractGeneral {
                text: text.to_string(),
                history: self.window(history).to_vec(),
            });
        self.entities(&request)
    }

    pub fn extract_medical_entities(&self, text: &str, history: &[Turn]) -> Result<Vec<MedicalEntity>, PipelineError> {
        let prompt = format!(
            "List medicines and vaccines in the message by trade name and group \
             (vitamin, disinfectant, hormone, antihelminthic, antibiotic, vaccine). Reply with \
             JSON {{\"entities\": [{{\"trade_name\", \"group\", \"kind\": \"medicine\"|\"vaccine\"}}]}}.\n\
             Conversation:\n{}\nMessage: {text}",
            history::render(self.window(history))
        );
        let request = ModelRequest::new(Purpose::Extract, prompt)?
            .with_parameter("temperature", 0.0)
            .with_context(TaskContext::ExtractMedical {
                text: text.to_string(),
                history: self.window(history).to_vec(),
            });
        self.entities(&request)
    }

    fn entities<T: serde::de::DeserializeOwned>(&self, request: &ModelRequest) -> Result<Vec<T>, PipelineError> {
        let response = self.gateway.call(request)?;
        let value = extract_json(&response.text).ok_or_else(|| PipelineError::Malformed(response.text.clone()))?;
        let reply: EntityReply<T> =
            serde_json::from_value(value).map_err(|e| PipelineError::Malformed(e.to_string()))?;
        Ok(reply.entities)
    }

    /// Both extractions, run side by side.
    pub fn extract(&self, text: &str, history: &[Turn]) -> Result<EntitySet, PipelineError> {
        let (general, medical) = rayon::join(
            || self.extract_general_entities(text, history),
            || self.extract_medical_entities(text, history),
        );
        Ok(EntitySet::new(general?, medical?))
    }

    /// Stage 1 folds general entities and recent history into the query,
    /// stage 2 folds in medicine and vaccine specifics. A stage with no
    /// entities passes its input through unchanged.
    pub fn contextualize(
        &self,
        query: &str,
        entities: &EntitySet,
        history: &[Turn],
    ) -> Result<ContextualizedQuery, PipelineError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let stage1 = if entities.general.is_empty() {
            query.to_string()
        } else {
            let window = self.window(history);
            let terms: Vec<String> = entities
                .general
                .iter()
                .map(|e| format!("{} ({})", e.term, e.kind))
                .collect();
            let prompt = format!(
                "Rewrite the question so it stands alone, stating these terms explicitly: {}.\n\
                 Conversation:\n{}\nQuestion: {query}",
                terms.join("; "),
                history::render(window)
            );
            let request = ModelRequest::new(Purpose::Rewrite, prompt)?.with_context(TaskContext::RewriteGeneral {
                query: query.to_string(),
                entities: entities.general.clone(),
                history: window.to_vec(),
            });
            non_empty(self.gateway.call(&request)?.text, query)
        };
        let stage2 = if entities.medical.is_empty() {
            stage1.clone()
        } else {
            let products: Vec<String> = entities
                .medical
                .iter()
                .map(|m| {
                    format!(
                        "{} ({:?})",
                        m.trade_name.as_deref().or(m.group.as_deref()).unwrap_or("-"),
                        m.kind
                    )
                })
                .collect();
            let prompt = format!(
                "Rewrite the question to name these products and their use explicitly: {}.\nQuestion: {stage1}",
                products.join("; ")
            );
            let request = ModelRequest::new(Purpose::Rewrite, prompt)?.with_context(TaskContext::RewriteMedical {
                query: stage1.clone(),
                entities: entities.medical.clone(),
            });
            non_empty(self.gateway.call(&request)?.text, &stage1)
        };
        Ok(ContextualizedQuery {
            original: query.to_string(),
            stage1,
            final_query: stage2.clone(),
            stage2,
        })
    }

    pub fn retrieve(
        &self,
        cq: &ContextualizedQuery,
        filter: &FilterExpression,
        k: usize,
    ) -> Result<Vec<RetrievalHit>, PipelineError> {
        if self.store.is_empty() {
            return Err(PipelineError::EmptyStore);
        }
        Ok(self.store.search_text(&cq.final_query, filter, k)?)
    }

    pub fn generate(
        &self,
        ts: &TaskState,
        cq: &ContextualizedQuery,
        hits: &[RetrievalHit],
    ) -> Result<GeneratedAnswer, PipelineError> {
        if hits.is_empty() {
            return Ok(GeneratedAnswer {
                text: self.config.refusal_template.clone(),
                attempts: 0,
                backend_id: None,
            });
        }
        let passages: Vec<Passage> = hits
            .iter()
            .map(|h| Passage {
                source_file: h.record.source_file.clone(),
                page: h.record.page,
                text: h.record.text.clone(),
            })
            .collect();
        let mut prompt = format!(
            "Answer the farmer's question using only the passages below and cite each \
             claim as (file, p. page). If they do not answer it, reply exactly: {}\n\
             Question: {}\nRewritten question: {}\nConversation:\n{}\nPassages:",
            self.config.refusal_template,
            cq.original,
            cq.final_query,
            history::render(self.window(&ts.history)),
        );
        for (i, p) in passages.iter().enumerate() {
            prompt.push_str(&format!("\n[{}] ({}, p. {}) {}", i + 1, p.source_file, p.page, p.text));
        }
        let request = ModelRequest::new(Purpose::Generate, prompt)?
            .with_parameter("temperature", 0.0)
            .with_context(TaskContext::Generate {
                query: cq.original.clone(),
                passages,
            });
        let response = self.gateway.call(&request)?;
        let text = response.text.trim();
        if text.is_empty() {
            return Err(PipelineError::Malformed("empty answer".into()));
        }
        Ok(GeneratedAnswer {
            text: text.to_string(),
            attempts: response.attempts,
            backend_id: Some(response.backend_id),
        })
    }

    pub fn assemble(&self, answer: GeneratedAnswer, hits: &[RetrievalHit], ts: &TaskState) -> RecommendationOutput {
        let citations = hits
            .iter()
            .map(|h| Citation {
                source_file: h.record.source_file.clone(),
                page: h.record.page,
                chunk_index: h.record.chunk_index,
                similarity: h.similarity,
            })
            .collect();
        let mut metadata = ts.metadata.clone();
        metadata.insert("retry_count".into(), json!(answer.attempts));
        metadata.insert("backend_id".into(), json!(answer.backend_id));
        RecommendationOutput {
            task_id: ts.task_id.clone(),
            answer: answer.text,
            citations,
            metadata,
        }
    }

    /// Runs every stage and records their order and timings in the output
    /// metadata.
    pub fn run(
        &self,
        diagnosis: Option<DiseaseId>,
        query: &str,
        history: &[Turn],
    ) -> Result<RecommendationOutput, PipelineError> {
        let start = self.now();
        let mut stages = Vec::new();
        let mut stage_ms = serde_json::Map::new();
        let mut mark = |name: &str, since: u64, now: u64| {
            stages.push(name.to_string());
            stage_ms.insert(name.to_string(), json!(now.saturating_sub(since)));
        };

        let mut ts = self.register(diagnosis, query, history)?;
        mark("register", start, self.now());

        let t = self.now();
        let general = self.extract_general_entities(&ts.query, &ts.history)?;
        mark("extract_general", t, self.now());
        let t = self.now();
        let medical = self.extract_medical_entities(&ts.query, &ts.history)?;
        mark("extract_medical", t, self.now());
        let entities = EntitySet::new(general, medical);
        if ts.diagnosis.is_none() && !entities.medical.is_empty() {
            ts.filter = build_filter(&FilterContext {
                diagnosis: None,
                medical: true,
                trade_names: entities.trade_names(),
            });
        }

        let t = self.now();
        let cq = self.contextualize(&ts.query, &entities, &ts.history)?;
        mark("contextualize", t, self.now());

        let t = self.now();
        let hits = self.retrieve(&cq, &ts.filter, self.config.k)?;
        let query_vec = self.store.embed(&cq.final_query)?;
        let mass: f64 = self
            .store
            .retrieval_distribution(&query_vec, &ts.filter)?
            .iter()
            .take(hits.len())
            .map(|(_, p)| p)
            .sum();
        mark("retrieve", t, self.now());

        let t = self.now();
        let answer = self.generate(&ts, &cq, &hits)?;
        mark("generate", t, self.now());

        let t = self.now();
        ts.metadata.insert("filter".into(), json!(ts.filter));
        ts.metadata.insert("entities".into(), json!(entities));
        ts.metadata.insert("query".into(), json!(cq));
        ts.metadata.insert("retrieval_mass".into(), json!(mass));
        let mut out = self.assemble(answer, &hits, &ts);
        mark("assemble", t, self.now());

        out.metadata.insert("stages".into(), json!(stages));
        out.metadata.insert("stage_ms".into(), Value::Object(stage_ms));
        out.metadata
            .insert("elapsed_ms".into(), json!(self.now().saturating_sub(start)));
        Ok(out)
    }
}

fn non_empty(text: String, fallback: &str) -> String {
    let t = text.trim();
    if t.is_empty() {
        fallback.to_string()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, ManualClock};
    use crate::gateway::{BackoffPolicy, OfflineBackend, ScriptedBackend};
    use crate::store::{ChunkPolicy, Clause, DocumentMetadata, Domain, FilterKey, HashingEmbedder, PageInput};

    fn corpus() -> Vec<PageInput> {
        let mut asf = DocumentMetadata::new(Domain::Disease);
        asf.disease_code = Some(DiseaseId::asf());
        let mut prrs = DocumentMetadata::new(Domain::Disease);
        prrs.disease_code = Some(DiseaseId::prrs());
        let mut agita = DocumentMetadata::new(Domain::Vaccine);
        agita.trade_names = vec!["Agita".into()];
        agita.group = Some("insecticide".into());
        vec![
            PageInput {
                source_file: "ASF-2022.pdf".into(),
                page: 12,
                text: "ASF is a viral disease of pigs. For ASF testing, collect blood, saliva, lymph nodes, organ samples. Do NOT perform on-farm necropsy!".into(),
                metadata: asf,
            },
            PageInput {
                source_file: "PRRS-2021.pdf".into(),
                page: 4,
                text: "PRRS testing uses serum samples and oral fluids.".into(),
                metadata: prrs,
            },
            PageInput {
                source_file: "DLD-drugs.pdf".into(),
                page: 7,
                text: "Agita is a fly bait. Scatter Agita granules near pig pens.".into(),
                metadata: agita,
            },
        ]
    }

    fn setup_with(backend: Arc<dyn crate::gateway::Backend>) -> (RecommendationPipeline, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(1_000));
        let gw = Gateway::new(clock.clone(), BackoffPolicy::default());
        gw.register_backend(backend).unwrap();
        let store = KnowledgeStore::in_memory(Arc::new(HashingEmbedder::new(256).unwrap()), ChunkPolicy::default()).unwrap();
        store.ingest(&corpus()).unwrap();
        (
            RecommendationPipeline::new(Arc::new(gw), Arc::new(store), PipelineConfig::default(), 7),
            clock,
        )
    }

    fn setup() -> RecommendationPipeline {
        setup_with(Arc::new(OfflineBackend::default())).0
    }

    #[test]
    fn register_filters() {
        let p = setup();
        let ts = p.register(Some(DiseaseId::asf()), "What samples are used for ASF testing?", &[]).unwrap();
        assert_eq!(
            ts.filter.clauses,
            vec![Clause::equals(FilterKey::Domain, "disease"), Clause::equals(FilterKey::DiseaseCode, "ASF")]
        );
        let ts = p.register(None, "Which vaccine should I buy?", &[]).unwrap();
        assert_eq!(ts.filter.clauses, vec![Clause::equals(FilterKey::Domain, "vaccine")]);
        assert!(p.register(None, "how are you", &[]).unwrap().filter.is_match_all());
        assert!(matches!(p.register(None, "  ", &[]), Err(PipelineError::EmptyQuery)));
    }

    #[test]
    fn entity_extraction() {
        let p = setup();
        let g = p.extract_general_entities("pigs roll over after ASF exposure", &[]).unwrap();
        assert!(g.contains(&GeneralEntity { term: "Roll Over".into(), kind: "status-transition".into() }));
        assert!(g.iter().any(|e| e.term == "ASF" && e.kind == "disease"));
        assert!(p.extract_general_entities("hello", &[]).unwrap().is_empty());
        let m = p.extract_medical_entities("DLD for Agita", &[]).unwrap();
        assert_eq!(m, vec![MedicalEntity { trade_name: Some("Agita".into()), group: None, kind: MedicalKind::Medicine }]);
        let m = p.extract_medical_entities("which disinfectant for water", &[]).unwrap();
        assert_eq!(m[0].group.as_deref(), Some("disinfectant"));
        assert!(p.extract_medical_entities("hello", &[]).unwrap().is_empty());
    }

    #[test]
    fn contextualize_stages() {
        let p = setup();
        let q = "What samples are used?";
        let cq = p.contextualize(q, &EntitySet::default(), &[Turn::user("hi")]).unwrap();
        assert_eq!((cq.stage1.as_str(), cq.stage2.as_str(), cq.final_query.as_str()), (q, q, q));

        let set = EntitySet::new(vec![GeneralEntity { term: "ASF".into(), kind: "disease".into() }], vec![]);
        let cq = p.contextualize(q, &set, &[]).unwrap();
        assert!(cq.stage1.contains("ASF"));
        assert_eq!(cq.stage2, cq.stage1);

        let set = EntitySet::new(vec![], p.extract_medical_entities("DLD for Agita", &[]).unwrap());
        let cq = p.contextualize("DLD for Agita", &set, &[]).unwrap();
        assert!(cq.stage2.contains("Agita"));
        assert_eq!(cq.final_query, cq.stage2);
    }

    #[test]
    fn end_to_end_asf_sampling() {
        let p = setup();
        let out = p.run(Some(DiseaseId::asf()), "What samples are used for ASF testing?", &[]).unwrap();
        assert!(out.answer.contains("blood, saliva, lymph nodes, organ samples"));
        assert_eq!(out.citations.len(), 1);
        assert_eq!((out.citations[0].source_file.as_str(), out.citations[0].page), ("ASF-2022.pdf", 12));
        assert_eq!(out.metadata["stages"], json!(STAGES));
        assert_eq!(out.metadata["retry_count"], json!(1));
        let mass = out.metadata["retrieval_mass"].as_f64().unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trade_name_filter_after_extraction() {
        let p = setup();
        let out = p.run(None, "DLD for Agita", &[]).unwrap();
        assert!(out.citations.iter().all(|c| c.source_file == "DLD-drugs.pdf"));
        assert!(out.answer.contains("Agita"));
    }

    #[test]
    fn empty_hits_refuse() {
        let p = setup();
        let out = p.run(Some(DiseaseId::fmd()), "What causes FMD?", &[]).unwrap();
        assert_eq!(out.answer, REFUSAL_TEMPLATE);
        assert!(out.citations.is_empty());
        assert_eq!(out.metadata["retry_count"], json!(0));
    }

    #[test]
    fn retries_are_reported() {
        let flaky = ScriptedBackend::new("flaky").with_fallback(Arc::new(OfflineBackend::default()));
        let flaky = Arc::new(flaky);
        let (p, clock) = setup_with(flaky.clone());
        let cq = ContextualizedQuery {
            original: "ASF testing samples".into(),
            stage1: "ASF testing samples".into(),
            stage2: "ASF testing samples".into(),
            final_query: "ASF testing samples".into(),
        };
        let ts = p.register(Some(DiseaseId::asf()), "ASF testing samples", &[]).unwrap();
        let hits = p.retrieve(&cq, &ts.filter, 4).unwrap();
        flaky.fail_next(4);
        let answer = p.generate(&ts, &cq, &hits).unwrap();
        assert_eq!(answer.attempts, 5);
        assert_eq!(clock.sleeps().len(), 4);
        let out = p.assemble(answer, &hits, &ts);
        assert_eq!(out.metadata["retry_count"], json!(5));
    }

    #[test]
    fn elapsed_time_uses_the_clock() {
        let (p, clock) = setup_with(Arc::new(OfflineBackend::default()));
        let flaky = ScriptedBackend::new("slow").with_fallback(Arc::new(OfflineBackend::default())).with_failures(1);
        p.gateway.register_backend(Arc::new(flaky)).unwrap();
        p.gateway.select_backend("slow").unwrap();
        let out = p.run(Some(DiseaseId::asf()), "What samples are used for ASF testing?", &[]).unwrap();
        // One failed extraction attempt sleeps 500 ms on the manual clock.
        assert_eq!(out.metadata["elapsed_ms"], json!(500));
        assert_eq!(clock.now_ms(), 1_500);
    }

    #[test]
    fn deterministic_output() {
        let a = setup().run(None, "What samples are used for ASF testing?", &[]).unwrap();
        let b = setup().run(None, "What samples are used for ASF testing?", &[]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn empty_store_is_an_error() {
        let gw = Gateway::new(Arc::new(ManualClock::new(0)), BackoffPolicy::default());
        gw.register_backend(Arc::new(OfflineBackend::default())).unwrap();
        let store = KnowledgeStore::in_memory(Arc::new(HashingEmbedder::new(16).unwrap()), ChunkPolicy::default()).unwrap();
        let p = RecommendationPipeline::new(Arc::new(gw), Arc::new(store), PipelineConfig::default(), 0);
        assert!(matches!(p.run(None, "anything", &[]), Err(PipelineError::EmptyStore)));
    }
}
