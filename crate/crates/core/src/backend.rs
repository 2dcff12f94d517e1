//! Text generation backends: remote HTTP endpoints and deterministic local
//! stand-ins.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid generation parameters: {0}")]
    Params(String),
    #[error("request failed after {attempts} attempts (last status {status:?}): {message}")]
    Exhausted {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no recorded completion for request {0}")]
    NotRecorded(String),
    #[error("scripted backend ran out of responses")]
    ScriptExhausted,
    #[error("backend returned {got} completions, expected {expected}")]
    Count { got: usize, expected: usize },
    #[error("{path}: {message}")]
    Transcript { path: PathBuf, message: String },
    #[error("missing configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Sampling,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub num_samples: usize,
    pub max_new_tokens: usize,
    pub mode: DecodeMode,
}

impl Default for GenerationParams {
    /// Nucleus sampling of ten candidates.
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.95,
            num_samples: 10,
            max_new_tokens: 512,
            mode: DecodeMode::Sampling,
        }
    }
}

impl GenerationParams {
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            num_samples: 1,
            max_new_tokens: 512,
            mode: DecodeMode::Greedy,
        }
    }

    /// One sampled completion, used when asking for tests.
    pub fn test_generation() -> Self {
        Self {
            num_samples: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::Params(format!(
                "temperature {} < 0",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Params(format!(
                "top_p {} not in (0, 1]",
                self.top_p
            )));
        }
        if self.num_samples == 0 {
            return Err(BackendError::Params(
                "num_samples must be at least 1".into(),
            ));
        }
        if self.mode == DecodeMode::Greedy && self.num_samples != 1 {
            return Err(BackendError::Params(format!(
                "greedy decoding yields one sample, {} requested",
                self.num_samples
            )));
        }
        Ok(())
    }
}

pub trait Backend: Send + Sync {
    /// Exactly `params.num_samples` completions for `prompt`.
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        (**self).complete(prompt, params)
    }
}

/// Stable key for a request: hex SHA-256 over the prompt and parameters.
pub fn request_hash(prompt: &str, params: &GenerationParams) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params).expect("params serialize"));
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Answers from a table keyed by prompt hash, with an optional fallback.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    table: BTreeMap<String, String>,
    fallback: Option<String>,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn always(text: impl Into<String>) -> Self {
        Self {
            table: BTreeMap::new(),
            fallback: Some(text.into()),
        }
    }

    pub fn with(mut self, prompt: &str, text: impl Into<String>) -> Self {
        self.table.insert(prompt_hash(prompt), text.into());
        self
    }
}

impl Backend for StubBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        let text = self
            .table
            .get(&prompt_hash(prompt))
            .or(self.fallback.as_ref())
            .ok_or_else(|| BackendError::NotRecorded(prompt_hash(prompt)))?;
        Ok(vec![text.clone(); params.num_samples])
    }
}

/// Hands out queued responses in order, one per completion, regardless of
/// the prompt. Every prompt seen is kept for inspection.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Result<String, u16>>>,
    seen: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            seen: Mutex::default(),
        }
    }

    /// Queues a failure that surfaces as an exhausted request with `status`.
    pub fn then_fail(self, status: u16) -> Self {
        self.queue.lock().unwrap().push_back(Err(status));
        self
    }

    pub fn prompts(&self) -> Vec<String> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        self.seen.lock().unwrap().push(prompt.to_owned());
        let mut queue = self.queue.lock().unwrap();
        (0..params.num_samples)
            .map(|_| match queue.pop_front() {
                Some(Ok(text)) => Ok(text),
                Some(Err(status)) => Err(BackendError::Exhausted {
                    attempts: 1,
                    status: Some(status),
                    message: "scripted failure".into(),
                }),
                None => Err(BackendError::ScriptExhausted),
            })
            .collect()
    }
}

/// Request hash to completions, as stored on disk.
pub type Transcript = BTreeMap<String, Vec<String>>;

pub fn load_transcript(path: &Path) -> Result<Transcript, BackendError> {
    let err = |message: String| BackendError::Transcript {
        path: path.to_owned(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

pub fn save_transcript(path: &Path, transcript: &Transcript) -> Result<(), BackendError> {
    let text = serde_json::to_string_pretty(transcript).expect("transcript serializes");
    fs::write(path, text).map_err(|e| BackendError::Transcript {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Serves completions captured earlier by [`RecordingBackend`].
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    transcript: Transcript,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        load_transcript(path).map(Self::new)
    }
}

impl Backend for ReplayBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        let key = request_hash(prompt, params);
        let out = self
            .transcript
            .get(&key)
            .cloned()
            .ok_or(BackendError::NotRecorded(key))?;
        if out.len() != params.num_samples {
            return Err(BackendError::Count {
                got: out.len(),
                expected: params.num_samples,
            });
        }
        Ok(out)
    }
}

/// Forwards to another backend and keeps every answer for replay.
pub struct RecordingBackend<B> {
    inner: B,
    transcript: Mutex<Transcript>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            transcript: Mutex::default(),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        save_transcript(path, &self.transcript())
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        let out = self.inner.complete(prompt, params)?;
        self.transcript
            .lock()
            .unwrap()
            .insert(request_hash(prompt, params), out.clone());
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST {endpoint}` with `prompt`, answers in `choices[].text`.
    Completions,
    /// `POST {endpoint}` with `messages`, answers in `choices[].message.content`.
    Chat,
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub style: ApiStyle,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub audit_log: Option<PathBuf>,
}

impl HttpConfig {
    pub const ENDPOINT_VAR: &'static str = "DEPBENCH_ENDPOINT";
    pub const API_KEY_VAR: &'static str = "DEPBENCH_API_KEY";
    pub const MODEL_VAR: &'static str = "DEPBENCH_MODEL";

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            style: ApiStyle::Completions,
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(300),
            max_in_flight: 8,
            audit_log: None,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let endpoint = var(Self::ENDPOINT_VAR)
            .ok_or_else(|| BackendError::Config(Self::ENDPOINT_VAR.into()))?;
        let model =
            var(Self::MODEL_VAR).ok_or_else(|| BackendError::Config(Self::MODEL_VAR.into()))?;
        let mut config = Self::new(endpoint, model);
        config.api_key = var(Self::API_KEY_VAR);
        if config
            .endpoint
            .trim_end_matches('/')
            .ends_with("chat/completions")
        {
            config.style = ApiStyle::Chat;
        }
        Ok(config)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// OpenAI-compatible HTTP endpoint.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
    audit: Mutex<()>,
}

#[derive(Serialize)]
struct AuditEntry<'a> {
    request: &'a str,
    prompt: &'a str,
    params: &'a GenerationParams,
    status: Option<u16>,
    completions: &'a [String],
}

enum Attempt {
    Done(Vec<String>),
    Retry(Option<u16>, String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            gate: Gate::new(config.max_in_flight),
            config,
            client,
            audit: Mutex::new(()),
        })
    }

    fn body(&self, prompt: &str, params: &GenerationParams) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.config.model,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "n": params.num_samples,
            "max_tokens": params.max_new_tokens,
        });
        match self.config.style {
            ApiStyle::Completions => body["prompt"] = prompt.into(),
            ApiStyle::Chat => {
                body["messages"] = serde_json::json!([{ "role": "user", "content": prompt }])
            }
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value, expected: usize) -> Attempt {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(None, e.to_string()),
        };
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(Some(status.as_u16()), format!("server answered {status}"));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Attempt::Fatal(BackendError::Exhausted {
                attempts: 1,
                status: Some(status.as_u16()),
                message: text,
            });
        }
        let value: serde_json::Value = match resp.json() {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(BackendError::Malformed(e.to_string())),
        };
        match parse_choices(&value, self.config.style) {
            Ok(out) if out.len() == expected => Attempt::Done(out),
            Ok(out) => Attempt::Fatal(BackendError::Count {
                got: out.len(),
                expected,
            }),
            Err(e) => Attempt::Fatal(e),
        }
    }

    fn audit(&self, prompt: &str, params: &GenerationParams, status: Option<u16>, out: &[String]) {
        let Some(path) = &self.config.audit_log else {
            return;
        };
        let entry = AuditEntry {
            request: &request_hash(prompt, params),
            prompt,
            params,
            status,
            completions: out,
        };
        let _lock = self.audit.lock().unwrap();
        let line = serde_json::to_string(&entry).expect("audit entry serializes");
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            log::warn!("could not append to audit log {}: {e}", path.display());
        }
    }
}

fn parse_choices(value: &serde_json::Value, style: ApiStyle) -> Result<Vec<String>, BackendError> {
    let choices = value
        .get("choices")
        .and_then(|c| c.as_array())
        .ok_or_else(|| BackendError::Malformed("no `choices` array".into()))?;
    choices
        .iter()
        .map(|c| {
            let text = match style {
                ApiStyle::Completions => c.get("text"),
                ApiStyle::Chat => c.get("message").and_then(|m| m.get("content")),
            };
            text.and_then(|t| t.as_str())
                .map(str::to_owned)
                .ok_or_else(|| BackendError::Malformed("choice without text".into()))
        })
        .collect()
}

impl Backend for HttpBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        let body = self.body(prompt, params);
        let _slot = self.gate.enter();
        let mut backoff = self.config.initial_backoff;
        let mut last = (None, String::new());
        for attempt in 1..=self.config.max_attempts.max(1) {
            match self.attempt(&body, params.num_samples) {
                Attempt::Done(out) => {
                    self.audit(prompt, params, Some(200), &out);
                    return Ok(out);
                }
                Attempt::Fatal(e) => {
                    self.audit(prompt, params, None, &[]);
                    return Err(e);
                }
                Attempt::Retry(status, message) => {
                    log::warn!("attempt {attempt} failed: {message}");
                    last = (status, message);
                    if attempt < self.config.max_attempts {
                        std::thread::sleep(backoff);
                        backoff = (backoff * 2).min(self.config.max_backoff);
                    }
                }
            }
        }
        self.audit(prompt, params, last.0, &[]);
        Err(BackendError::Exhausted {
            attempts: self.config.max_attempts.max(1),
            status: last.0,
            message: last.1,
        })
    }
}

/// The first fenced code block of a chat-style answer, or the whole text.
pub fn extract_code(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.to_owned();
    };
    let after = &text[open + 3..];
    // Skip the language tag line.
    let Some(nl) = after.find('\n') else {
        return text.to_owned();
    };
    let code = &after[nl + 1..];
    match code.find("```") {
        Some(close) => code[..close].trim_end().to_owned() + "\n",
        None => code.to_owned(),
    }
}
