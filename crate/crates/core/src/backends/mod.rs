//! Chat-completion backends behind one interface: an OpenAI-compatible HTTP
//! client and a deterministic scriptable mock, both fronted by a persistent
//! response cache keyed on the full request.

mod cache;
mod http;
mod mock;

pub use cache::{resolve_cache_dir, ResponseCache, CACHE_DIR_ENV};
pub use mock::MockScript;

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, FieldHasher};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend {backend_id}: {message}")]
    BadConfig { backend_id: String, message: String },
    #[error("chat request must have a nonempty user prompt")]
    EmptyUserPrompt,
    #[error("cannot read image {path}: {source}")]
    UnreadableImage {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mock script {path}: {message}")]
    BadMockScript { path: String, message: String },
    #[error("network failure after {attempts} attempts: {last_error}")]
    Network { attempts: u32, last_error: String },
    #[error("http status {status}: {excerpt}")]
    Status { status: u16, excerpt: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("api key variable {0} is not set")]
    MissingApiKey(String),
    #[error("cache error at {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

/// Backend definition. Temperature defaults to 0 and max_tokens to 512 so
/// that evaluation runs are comparable and reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
    /// Maximum request attempts for transient network failures.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Base backoff in milliseconds; doubles per retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Maximum concurrent in-flight completions for this backend.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    512
}
fn default_max_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_parallelism() -> usize {
    4
}

impl BackendConfig {
    pub fn mock(backend_id: &str, script: PathBuf) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: backend_id.to_string(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            api_key_env: None,
            mock_script: Some(script),
            max_attempts: default_max_attempts(),
            backoff_ms: default_backoff_ms(),
            parallelism: default_parallelism(),
        }
    }

    pub fn http(backend_id: &str, endpoint_url: &str, model_name: &str) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            kind: BackendKind::Http,
            endpoint_url: Some(endpoint_url.to_string()),
            model_name: model_name.to_string(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            api_key_env: None,
            mock_script: None,
            max_attempts: default_max_attempts(),
            backoff_ms: default_backoff_ms(),
            parallelism: default_parallelism(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let fail = |message: String| BackendError::BadConfig {
            backend_id: self.backend_id.clone(),
            message,
        };
        if self.kind == BackendKind::Http && self.endpoint_url.is_none() {
            return Err(fail("http backend needs endpoint_url".into()));
        }
        if self.kind == BackendKind::Mock && self.mock_script.is_none() {
            return Err(fail("mock backend needs mock_script".into()));
        }
        let temperature_ok = self.temperature.is_finite() && self.temperature >= 0.0;
        if !temperature_ok {
            return Err(fail(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(fail("max_tokens must be > 0".into()));
        }
        if self.max_attempts == 0 {
            return Err(fail("max_attempts must be > 0".into()));
        }
        if self.parallelism == 0 {
            return Err(fail("parallelism must be > 0".into()));
        }
        Ok(())
    }
}

/// One chat completion request. The image reference is an opaque file
/// handle; only the backend reads its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub image_ref: Option<PathBuf>,
}

impl ChatRequest {
    pub fn text(user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: String::new(),
            user_prompt: user_prompt.into(),
            image_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    /// Verbatim completion text.
    pub text: String,
    pub from_cache: bool,
    pub latency_ms: u64,
}

/// Stable cache key: SHA-256 over the completion-relevant configuration and
/// the full request, with the image contributing by content hash. Identical
/// inputs produce identical keys across runs and platforms.
pub fn cache_key(config: &BackendConfig, request: &ChatRequest) -> Result<String, BackendError> {
    let mut h = FieldHasher::new("tutor-align-cache/1");
    h.text(&config.model_name)
        .f64(config.temperature)
        .u64(u64::from(config.max_tokens))
        .text(&request.system_prompt)
        .text(&request.user_prompt);
    match &request.image_ref {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| BackendError::UnreadableImage {
                path: path.display().to_string(),
                source,
            })?;
            h.u64(1).text(&sha256_hex(&bytes));
        }
        None => {
            h.u64(0);
        }
    }
    Ok(h.finish_hex())
}

enum Engine {
    Mock(MockScript),
    Http(http::HttpClient),
}

/// A ready-to-call backend: engine + cache + concurrency gate.
pub struct Backend {
    config: BackendConfig,
    cache: ResponseCache,
    engine: Engine,
    gate: Semaphore,
}

impl Backend {
    /// Build a backend. `cache_dir = None` resolves through
    /// `TUTOR_ALIGN_CACHE_DIR` and then the default directory.
    pub fn new(config: BackendConfig, cache_dir: Option<&Path>) -> Result<Self, BackendError> {
        config.validate()?;
        let engine = match config.kind {
            BackendKind::Mock => {
                let path = config.mock_script.as_ref().expect("validated");
                Engine::Mock(MockScript::load(path)?)
            }
            BackendKind::Http => Engine::Http(http::HttpClient::new(&config)?),
        };
        let cache = ResponseCache::new(resolve_cache_dir(cache_dir));
        let gate = Semaphore::new(config.parallelism);
        Ok(Self {
            config,
            cache,
            engine,
            gate,
        })
    }

    pub fn id(&self) -> &str {
        &self.config.backend_id
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Complete a chat request. Cache hits return the stored text verbatim
    /// and perform no engine call.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if request.user_prompt.is_empty() {
            return Err(BackendError::EmptyUserPrompt);
        }
        let started = Instant::now();
        let key = cache_key(&self.config, request)?;
        if let Some(text) = self.cache.get(&key)? {
            return Ok(ChatResponse {
                text,
                from_cache: true,
                latency_ms: started.elapsed().as_millis() as u64,
            });
        }

        let _permit = self.gate.acquire();
        let text = match &self.engine {
            Engine::Mock(script) => script.respond(&request.user_prompt),
            Engine::Http(client) => client.complete(&self.config, request)?,
        };
        self.cache.put(&key, &self.config.model_name, &text)?;
        Ok(ChatResponse {
            text,
            from_cache: false,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Counting semaphore bounding in-flight completions per backend.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard(self)
    }
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.0.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.0.available.notify_one();
    }
}
