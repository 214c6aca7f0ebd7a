//! Adapter for a hosted text model behind a JSON-over-HTTPS endpoint.
//!
//! Wire contract: `POST {endpoint}` with `{"model", "prompt", "parameters"}`
//! and a bearer token read from the environment; the reply is `{"text": ...}`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendKind, ModelRequest};

static EGRESS: AtomicU64 = AtomicU64::new(0);

/// Number of outbound requests attempted by hosted backends in this process.
pub fn egress_count() -> u64 {
    EGRESS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostedConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "HERDSENSE_API_KEY".into()
}

fn default_timeout() -> u64 {
    60
}

pub struct HostedBackend {
    id: String,
    config: HostedConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    parameters: &'a std::collections::BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

impl HostedBackend {
    pub fn new(id: impl Into<String>, config: HostedConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            id: id.into(),
            config,
            agent,
        }
    }
}

impl Backend for HostedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Hosted
    }

    fn send(&self, request: &ModelRequest) -> Result<String, BackendError> {
        let key = std::env::var(&self.config.api_key_env).map_err(|_| {
            BackendError::Unavailable(format!("{} is not set", self.config.api_key_env))
        })?;
        EGRESS.fetch_add(1, Ordering::SeqCst);
        let body = WireRequest {
            model: &self.config.model,
            prompt: request.prompt(),
            parameters: &request.parameters,
        };
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(BackendError::Unavailable(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(BackendError::Rejected(format!("HTTP {status}")));
        }
        let parsed: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(format!("bad response body: {e}")))?;
        Ok(parsed.text)
    }
}
