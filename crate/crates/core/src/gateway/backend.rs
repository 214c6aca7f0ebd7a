use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, BackendError, GatewayError, ModelRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Hosted,
    ScriptedMock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<BTreeMap<String, String>>,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn send(&self, request: &ModelRequest) -> Result<String, BackendError>;

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: self.id().to_string(),
            kind: self.kind(),
            fixtures: None,
        }
    }
}

/// Deterministic mock: answers from a digest-keyed fixture table, then from an
/// optional fallback backend. Can be told to fail its first `n` calls with a
/// transport error to exercise the retry path.
pub struct ScriptedBackend {
    id: String,
    fixtures: BTreeMap<String, String>,
    fallback: Option<Arc<dyn Backend>>,
    pending_failures: AtomicU32,
    calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            fixtures: BTreeMap::new(),
            fallback: None,
            pending_failures: AtomicU32::new(0),
            calls: AtomicU64::new(0),
        }
    }

    /// Scripts the response for an exact prompt.
    pub fn with_fixture(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.fixtures.insert(prompt_digest(prompt), response.into());
        self
    }

    /// Adds fixtures keyed by hex SHA-256 digest.
    pub fn with_digest_fixtures(mut self, fixtures: BTreeMap<String, String>) -> Self {
        self.fixtures.extend(fixtures);
        self
    }

    /// Loads a JSON object mapping prompt digests to responses.
    pub fn with_fixture_file(self, path: &Path) -> Result<Self, GatewayError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Fixtures(format!("{}: {e}", path.display())))?;
        let fixtures: BTreeMap<String, String> = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::Fixtures(format!("{}: {e}", path.display())))?;
        if let Some(bad) = fixtures
            .keys()
            .find(|k| k.len() != 64 || !k.chars().all(|c| c.is_ascii_hexdigit()))
        {
            return Err(GatewayError::Fixtures(format!(
                "{}: key {bad:?} is not a SHA-256 hex digest",
                path.display()
            )));
        }
        Ok(self.with_digest_fixtures(fixtures))
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn Backend>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn with_failures(self, n: u32) -> Self {
        self.pending_failures.store(n, Ordering::SeqCst);
        self
    }

    pub fn fail_next(&self, n: u32) {
        self.pending_failures.store(n, Ordering::SeqCst);
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ScriptedMock
    }

    fn send(&self, request: &ModelRequest) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let failing = self
            .pending_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |f| f.checked_sub(1))
            .is_ok();
        if failing {
            return Err(BackendError::Transport(format!("scripted failure on call {n}")));
        }
        let digest = request.digest();
        if let Some(text) = self.fixtures.get(&digest) {
            return Ok(text.clone());
        }
        match &self.fallback {
            Some(fb) => fb.send(request),
            None => Err(BackendError::NoFixture(digest)),
        }
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: self.id.clone(),
            kind: BackendKind::ScriptedMock,
            fixtures: Some(self.fixtures.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Purpose;

    #[test]
    fn identical_requests_get_identical_answers() {
        let b = ScriptedBackend::new("m").with_fixture("p", "r");
        let req = ModelRequest::new(Purpose::Classify, "p").unwrap();
        assert_eq!(b.send(&req).unwrap(), b.send(&req).unwrap());
        assert_eq!(b.calls(), 2);
    }

    #[test]
    fn fixture_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        let mut map = BTreeMap::new();
        map.insert(prompt_digest("hello"), "world".to_string());
        std::fs::write(&path, serde_json::to_string(&map).unwrap()).unwrap();
        let b = ScriptedBackend::new("m").with_fixture_file(&path).unwrap();
        let req = ModelRequest::new(Purpose::Generate, "hello").unwrap();
        assert_eq!(b.send(&req).unwrap(), "world");

        std::fs::write(&path, r#"{"nothex": "x"}"#).unwrap();
        assert!(ScriptedBackend::new("m").with_fixture_file(&path).is_err());
    }
}
