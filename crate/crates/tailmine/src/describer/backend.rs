//! Model-service backends: live OpenAI-compatible HTTP, read-through file
//! cache, and deterministic fixtures for hermetic runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DescriberError, Stage};

/// Which implementation produced (or served) a completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Cache,
    Fixture,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BackendKind::Live => "live",
            BackendKind::Cache => "cache",
            BackendKind::Fixture => "fixture",
        };
        f.write_str(s)
    }
}

/// One completion request. `payload` carries the stage input text
/// (description or joined keywords) for the text-only stages; describe-stage
/// requests identify the media item instead.
#[derive(Debug, Clone)]
pub struct ModelRequest {
    pub stage: Stage,
    pub prompt: String,
    pub example_id: String,
    pub media_index: usize,
    pub image: Option<PathBuf>,
    pub payload: String,
}

impl ModelRequest {
    pub fn for_media(stage: Stage, prompt: String, example_id: &str, media_index: usize, media: &str) -> Self {
        Self {
            stage,
            prompt,
            example_id: example_id.to_string(),
            media_index,
            image: Some(PathBuf::from(media)),
            payload: String::new(),
        }
    }

    pub fn for_text(stage: Stage, prompt: String, payload: String) -> Self {
        Self {
            stage,
            prompt,
            example_id: String::new(),
            media_index: 0,
            image: None,
            payload,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub served_by: BackendKind,
}

/// A completion source. All implementations are safe to call from several
/// worker threads at once.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<Completion, DescriberError>;
    fn kind(&self) -> BackendKind;
    /// Model identity plus decoding parameters; part of every cache key.
    fn model_tag(&self) -> &str;
}

// ---------------------------------------------------------------------------
// Fixture backend
// ---------------------------------------------------------------------------

/// Canned responses keyed by example/media for describe-stage requests and by
/// input text for the text-only stages. Reentrant and side-effect free.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureBackend {
    #[serde(default = "default_fixture_tag")]
    pub model_tag: String,
    /// example id -> one response per media item.
    #[serde(default)]
    pub describe: BTreeMap<String, Vec<String>>,
    /// description text -> keyword-list response.
    #[serde(default)]
    pub summarize: BTreeMap<String, String>,
    /// `; `-joined keywords -> categorization response.
    #[serde(default)]
    pub categorize: BTreeMap<String, String>,
}

fn default_fixture_tag() -> String {
    "fixture".to_string()
}

impl FixtureBackend {
    pub fn new() -> Self {
        Self {
            model_tag: default_fixture_tag(),
            ..Self::default()
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DescriberError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| DescriberError::FixtureUnavailable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_slice(&bytes).map_err(|e| DescriberError::FixtureUnavailable {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn with_describe(mut self, id: &str, texts: &[&str]) -> Self {
        self.describe
            .insert(id.to_string(), texts.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_summarize(mut self, input: &str, response: &str) -> Self {
        self.summarize.insert(input.to_string(), response.to_string());
        self
    }

    pub fn with_categorize(mut self, input: &str, response: &str) -> Self {
        self.categorize.insert(input.to_string(), response.to_string());
        self
    }
}

impl Backend for FixtureBackend {
    fn complete(&self, request: &ModelRequest) -> Result<Completion, DescriberError> {
        let text = match request.stage {
            Stage::Describe => self
                .describe
                .get(&request.example_id)
                .and_then(|texts| texts.get(request.media_index))
                .cloned(),
            Stage::Summarize => self.summarize.get(&request.payload).cloned(),
            Stage::Categorize => self.categorize.get(&request.payload).cloned(),
        };
        match text {
            Some(text) => Ok(Completion {
                text,
                served_by: BackendKind::Fixture,
            }),
            None => Err(DescriberError::TransportFailed {
                attempts: 1,
                message: format!(
                    "no fixture entry for stage {} example {:?} media {}",
                    request.stage, request.example_id, request.media_index
                ),
            }),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Fixture
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }
}

// ---------------------------------------------------------------------------
// Live backend
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

/// Paces requests to at most `requests_per_second` across worker threads.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let min_interval = Duration::from_secs_f64(1.0 / requests_per_second.max(1e-6));
        Self {
            min_interval,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let at = (*next).max(now);
            *next = at + self.min_interval;
            at.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// HTTP client for an OpenAI-compatible chat-completions endpoint. Describe
/// requests attach the media item as a base64 data URL. Failures retry with
/// exponential backoff before surfacing as transport errors.
pub struct LiveBackend {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    max_tokens: u32,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    client: reqwest::blocking::Client,
    tag: String,
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let model = model.into();
        let temperature = 0.0;
        let max_tokens = 512;
        Self {
            endpoint: endpoint.into(),
            api_key: std::env::var("MINER_API_KEY").ok(),
            tag: format!("{model}:temp={temperature},max_tokens={max_tokens}"),
            model,
            temperature,
            max_tokens,
            retry: RetryPolicy::default(),
            limiter: None,
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_decoding(mut self, temperature: f64, max_tokens: u32) -> Self {
        self.temperature = temperature;
        self.max_tokens = max_tokens;
        self.tag = format!("{}:temp={temperature},max_tokens={max_tokens}", self.model);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.limiter = Some(RateLimiter::new(requests_per_second));
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    fn build_body(&self, request: &ModelRequest) -> Result<serde_json::Value, DescriberError> {
        let mut content = vec![serde_json::json!({"type": "text", "text": request.prompt})];
        if let Some(image) = &request.image {
            let bytes = fs::read(image).map_err(|e| DescriberError::MediaUnreadable {
                path: image.display().to_string(),
                message: e.to_string(),
            })?;
            let mime = match image.extension().and_then(|e| e.to_str()) {
                Some("png") => "image/png",
                _ => "image/jpeg",
            };
            let encoded = base64_encode(&bytes);
            content.push(serde_json::json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{mime};base64,{encoded}")}
            }));
        }
        Ok(serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": [{"role": "user", "content": content}],
        }))
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, String> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| "response missing choices[0].message.content".to_string())
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &ModelRequest) -> Result<Completion, DescriberError> {
        let body = self.build_body(request)?;
        let mut backoff = self.retry.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=self.retry.attempts.max(1) {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        served_by: BackendKind::Live,
                    })
                }
                Err(e) => {
                    log::warn!(
                        "live backend attempt {attempt}/{}: {e}",
                        self.retry.attempts
                    );
                    last_error = e;
                }
            }
            if attempt < self.retry.attempts {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(DescriberError::TransportFailed {
            attempts: self.retry.attempts,
            message: last_error,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn model_tag(&self) -> &str {
        &self.tag
    }
}

const BASE64_ALPHABET: &[u8; 64] =
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

fn base64_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len().div_ceil(3) * 4);
    for chunk in bytes.chunks(3) {
        let b = [chunk[0], *chunk.get(1).unwrap_or(&0), *chunk.get(2).unwrap_or(&0)];
        let n = (u32::from(b[0]) << 16) | (u32::from(b[1]) << 8) | u32::from(b[2]);
        for i in 0..4 {
            if i <= chunk.len() {
                out.push(BASE64_ALPHABET[((n >> (18 - 6 * i)) & 0x3f) as usize] as char);
            } else {
                out.push('=');
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Read-through cache
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    stage: String,
    model_tag: String,
    example_id: String,
    media_index: usize,
    prompt_sha256: String,
    response: String,
}

/// Content-addressed completion cache. Hits are served from disk; misses go
/// to the wrapped backend and are written back. Without an inner backend the
/// cache is the only source and misses are errors.
pub struct CacheBackend {
    inner: Option<Box<dyn Backend>>,
    dir: PathBuf,
    tag: String,
}

impl CacheBackend {
    pub fn over(inner: Box<dyn Backend>, dir: impl Into<PathBuf>) -> Self {
        let tag = inner.model_tag().to_string();
        Self {
            inner: Some(inner),
            dir: dir.into(),
            tag,
        }
    }

    /// Cache-only mode: `model_tag` must match the tag of the run that
    /// populated the cache.
    pub fn cache_only(dir: impl Into<PathBuf>, model_tag: impl Into<String>) -> Self {
        Self {
            inner: None,
            dir: dir.into(),
            tag: model_tag.into(),
        }
    }

    fn key(&self, request: &ModelRequest) -> String {
        let mut hasher = Sha256::new();
        for part in [
            "v1",
            &request.stage.to_string(),
            &self.tag,
            &request.example_id,
            &request.media_index.to_string(),
            &request.prompt,
        ] {
            hasher.update(part.as_bytes());
            hasher.update([0u8]);
        }
        crate::hex_string(&hasher.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }
}

impl Backend for CacheBackend {
    fn complete(&self, request: &ModelRequest) -> Result<Completion, DescriberError> {
        let key = self.key(request);
        let path = self.entry_path(&key);
        if path.exists() {
            let bytes = fs::read(&path)?;
            let entry: CacheEntry =
                serde_json::from_slice(&bytes).map_err(|e| DescriberError::CacheCorrupt {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            return Ok(Completion {
                text: entry.response,
                served_by: BackendKind::Cache,
            });
        }
        let inner = self.inner.as_ref().ok_or_else(|| DescriberError::CacheMiss {
            key: key.clone(),
        })?;
        let completion = inner.complete(request)?;
        fs::create_dir_all(&self.dir)?;
        let entry = CacheEntry {
            stage: request.stage.to_string(),
            model_tag: self.tag.clone(),
            example_id: request.example_id.clone(),
            media_index: request.media_index,
            prompt_sha256: crate::hex_string(&Sha256::digest(request.prompt.as_bytes())),
            response: completion.text.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        fs::write(&path, bytes)?;
        Ok(completion)
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Cache
    }

    fn model_tag(&self) -> &str {
        &self.tag
    }
}
