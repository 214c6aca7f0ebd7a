use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fusion::FusionConfig;
use crate::gateway::{BackoffPolicy, HostedConfig};
use crate::pipeline::PipelineConfig;
use crate::router::DEFAULT_HISTORY_WINDOW;
use crate::store::ChunkPolicy;

use super::ServiceError;

/// Service configuration, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Seeds session and task ids.
    #[serde(default)]
    pub seed: u64,
    pub store: StoreConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub backoff: BackoffPolicy,
    #[serde(default)]
    pub router: RouterConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreConfig {
    /// Knowledge store file.
    pub path: PathBuf,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub chunking: ChunkPolicy,
    /// Session logs directory; defaults to `sessions/` next to the store file.
    #[serde(default)]
    pub sessions: Option<PathBuf>,
}

pub fn default_dimension() -> usize {
    256
}

impl StoreConfig {
    pub fn sessions_dir(&self) -> PathBuf {
        self.sessions.clone().unwrap_or_else(|| {
            self.path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("sessions")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Rule-based backend, no network. A struct variant so that stray keys
    /// are rejected like everywhere else.
    Offline {},
    /// Digest-keyed fixtures, falling back to the offline rules.
    Scripted { fixtures: PathBuf },
    Hosted {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        timeout_secs: Option<u64>,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Offline {}
    }
}

impl BackendConfig {
    pub fn hosted_config(&self) -> Option<HostedConfig> {
        match self {
            BackendConfig::Hosted {
                endpoint,
                model,
                api_key_env,
                timeout_secs,
            } => {
                let mut c: HostedConfig = serde_json::from_value(serde_json::json!({
                    "endpoint": endpoint,
                    "model": model,
                }))
                .expect("required fields present");
                if let Some(env) = api_key_env {
                    c.api_key_env = env.clone();
                }
                if let Some(t) = timeout_secs {
                    c.timeout_secs = *t;
                }
                Some(c)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterConfig {
    pub history_window: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            history_window: DEFAULT_HISTORY_WINDOW,
        }
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let config: ApiConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. `HERDSENSE_LISTEN` overrides the listen address.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Ok(listen) = std::env::var("HERDSENSE_LISTEN") {
            config.listen = listen;
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if self.store.dimension == 0 {
            return bad("store.dimension must be at least 1".into());
        }
        if let Err(m) = self.store.chunking.validate() {
            return bad(format!("store.chunking: {m}"));
        }
        if let Err(m) = self.backoff.validate() {
            return bad(format!("backoff: {m}"));
        }
        if let Err(e) = self.fusion.validate() {
            return bad(format!("fusion: {e}"));
        }
        if self.pipeline.k == 0 {
            return bad("pipeline.k must be at least 1".into());
        }
        if self.pipeline.refusal_template.trim().is_empty() {
            return bad("pipeline.refusal_template must not be empty".into());
        }
        Ok(())
    }
}
