//! Uniform access to language-model backends.
//!
//! Every call goes through [`Gateway::call_with_backoff`]: up to five attempts,
//! sleeping `base_delay * multiplier^(a-2)` on the injected [`Clock`] before
//! attempt `a >= 2`. Backends are registered by id and one is selected at a
//! time; the scripted mock answers from SHA-256 prompt-digest fixtures and can
//! fall back to the rule-based [`OfflineBackend`].

mod backend;
mod context;
mod hosted;
mod offline;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::Clock;

pub use backend::{Backend, BackendDescriptor, BackendKind, ScriptedBackend};
pub use context::{Passage, TaskContext};
pub use hosted::{egress_count, HostedBackend, HostedConfig};
pub use offline::OfflineBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Classify,
    Opine,
    Extract,
    Rewrite,
    Generate,
}

/// One model call. `context` carries the structured inputs the prompt was
/// rendered from; hosted backends only see the prompt, the offline backend
/// only reads the context. The fixture digest covers the prompt alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    purpose: Purpose,
    prompt: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<TaskContext>,
}

impl ModelRequest {
    pub fn new(purpose: Purpose, prompt: impl Into<String>) -> Result<Self, GatewayError> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        Ok(Self {
            purpose,
            prompt,
            parameters: BTreeMap::new(),
            context: None,
        })
    }

    pub fn with_context(mut self, context: TaskContext) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_parameter(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    /// Hex SHA-256 of the prompt, the key used by fixture files.
    pub fn digest(&self) -> String {
        prompt_digest(&self.prompt)
    }
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub backend_id: String,
    /// Attempts used, including the successful one.
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("unsatisfactory response")]
    Unsatisfactory,
    #[error("no fixture for prompt digest {0}")]
    NoFixture(String),
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl BackendError {
    /// Transport-level failures (and validator rejections) are retried;
    /// missing fixtures and malformed requests fail immediately.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_) | BackendError::Unavailable(_) | BackendError::Unsatisfactory
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("no backend registered")]
    NoBackend,
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("backend {0:?} is already registered")]
    DuplicateBackend(String),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("retries exhausted after {} attempts: {}", .0.len(), .0.last().map(|e| e.to_string()).unwrap_or_default())]
    RetriesExhausted(Vec<BackendError>),
    #[error(transparent)]
    Backend(BackendError),
    #[error("invalid fixtures: {0}")]
    Fixtures(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackoffPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    pub multiplier: f64,
    /// Full jitter on each delay, seeded from the prompt digest. Off by default.
    pub jitter: bool,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            multiplier: 2.0,
            jitter: false,
        }
    }
}

impl BackoffPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        if !self.multiplier.is_finite() || self.multiplier <= 1.0 {
            return Err("multiplier must be a finite number greater than 1".into());
        }
        Ok(())
    }

    /// Delay slept before `attempt` (1-based). Zero for the first attempt.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt < 2 {
            return Duration::ZERO;
        }
        self.base_delay
            .mul_f64(self.multiplier.powi(attempt as i32 - 2))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

pub type ResponseValidator = Arc<dyn Fn(&ModelRequest, &str) -> bool + Send + Sync>;

pub struct Gateway {
    backends: RwLock<BTreeMap<String, Arc<dyn Backend>>>,
    selected: RwLock<Option<String>>,
    clock: Arc<dyn Clock>,
    policy: BackoffPolicy,
    validator: RwLock<Option<ResponseValidator>>,
}

impl Gateway {
    pub fn new(clock: Arc<dyn Clock>, policy: BackoffPolicy) -> Self {
        Self {
            backends: RwLock::new(BTreeMap::new()),
            selected: RwLock::new(None),
            clock,
            policy,
            validator: RwLock::new(None),
        }
    }

    /// Registers a backend. The first one registered becomes the selection.
    pub fn register_backend(&self, backend: Arc<dyn Backend>) -> Result<(), GatewayError> {
        let id = backend.id().to_string();
        let mut backends = self.backends.write();
        if backends.contains_key(&id) {
            return Err(GatewayError::DuplicateBackend(id));
        }
        backends.insert(id.clone(), backend);
        let mut selected = self.selected.write();
        if selected.is_none() {
            *selected = Some(id);
        }
        Ok(())
    }

    pub fn select_backend(&self, id: &str) -> Result<(), GatewayError> {
        if !self.backends.read().contains_key(id) {
            return Err(GatewayError::UnknownBackend(id.to_string()));
        }
        *self.selected.write() = Some(id.to_string());
        Ok(())
    }

    pub fn selected_backend(&self) -> Option<String> {
        self.selected.read().clone()
    }

    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        self.backends.read().values().map(|b| b.descriptor()).collect()
    }

    pub fn set_validator(&self, validator: Option<ResponseValidator>) {
        *self.validator.write() = validator;
    }

    pub fn policy(&self) -> BackoffPolicy {
        self.policy
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// [`Self::call_with_backoff`] with the gateway's configured policy.
    pub fn call(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        self.call_with_backoff(request, &self.policy)
    }

    pub fn call_with_backoff(
        &self,
        request: &ModelRequest,
        policy: &BackoffPolicy,
    ) -> Result<ModelResponse, GatewayError> {
        let backend = {
            let selected = self.selected.read();
            let id = selected.as_ref().ok_or(GatewayError::NoBackend)?;
            self.backends
                .read()
                .get(id)
                .cloned()
                .ok_or_else(|| GatewayError::UnknownBackend(id.clone()))?
        };
        let validator = self.validator.read().clone();
        let mut jitter_rng = policy.jitter.then(|| {
            let digest = Sha256::digest(request.prompt().as_bytes());
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&digest);
            ChaCha8Rng::from_seed(seed)
        });

        let mut errors = Vec::new();
        for attempt in 1..=policy.max_attempts {
            if attempt > 1 {
                let mut delay = policy.delay_before(attempt);
                if let Some(rng) = jitter_rng.as_mut() {
                    delay = delay.mul_f64(rng.random::<f64>());
                }
                self.clock.sleep(delay);
            }
            let outcome = backend.send(request).and_then(|text| {
                match &validator {
                    Some(ok) if !ok(request, &text) => Err(BackendError::Unsatisfactory),
                    _ => Ok(text),
                }
            });
            match outcome {
                Ok(text) => {
                    return Ok(ModelResponse {
                        text,
                        backend_id: backend.id().to_string(),
                        attempts: attempt,
                    })
                }
                Err(err) if err.is_retryable() => {
                    log::warn!(
                        "backend {} attempt {attempt}/{} failed: {err}",
                        backend.id(),
                        policy.max_attempts
                    );
                    errors.push(err);
                }
                Err(err) => return Err(GatewayError::Backend(err)),
            }
        }
        Err(GatewayError::RetriesExhausted(errors))
    }
}

/// Pulls the first JSON value out of a model reply, tolerating code fences or
/// prose around it.
pub fn extract_json(text: &str) -> Option<serde_json::Value> {
    if let Ok(v) = serde_json::from_str(text.trim()) {
        return Some(v);
    }
    let start = text.find(['{', '['])?;
    let mut stream =
        serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
    stream.next()?.ok()
}
