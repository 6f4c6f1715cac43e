//! Chat-completions client with a record/replay cassette.
//!
//! Every prompt is keyed by the SHA-256 of its serialized messages and the
//! model id. In `replay` mode answers come only from the cassette; a miss is
//! an error and never reaches the network.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prompting::{ChatMessage, Prompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    #[default]
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub mode: GatewayMode,
    pub cassette: Option<PathBuf>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// First backoff delay; doubles on each retry.
    pub retry_base_secs: f64,
    pub concurrency: usize,
    /// Seeds backoff jitter.
    pub seed: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: 2048,
            timeout_secs: 120.0,
            max_retries: 3,
            mode: GatewayMode::Replay,
            cassette: None,
            api_key_env: "OPENAI_API_KEY".into(),
            retry_base_secs: 1.0,
            concurrency: 4,
            seed: 0,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config("timeout must be > 0".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("gateway concurrency must be >= 1".into()));
        }
        if self.mode != GatewayMode::Live && self.cassette.is_none() {
            return Err(Error::Config(format!("{:?} mode requires a cassette path", self.mode)));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct HashedRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

/// Hex SHA-256 over the model id and serialized messages.
pub fn prompt_hash(model: &str, messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(&HashedRequest { model, messages }).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub prompt_sha256: String,
    pub model: String,
    pub response: String,
}

/// JSONL store of recorded responses; appends are serialized.
#[derive(Debug)]
pub struct Cassette {
    path: PathBuf,
    entries: Mutex<HashMap<(String, String), String>>,
    writer: Mutex<()>,
}

impl Cassette {
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: CassetteEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.insert((e.prompt_sha256, e.model), e.response);
            }
        }
        Ok(Cassette {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
            writer: Mutex::new(()),
        })
    }

    pub fn get(&self, hash: &str, model: &str) -> Option<String> {
        self.entries
            .lock()
            .expect("cassette lock")
            .get(&(hash.to_string(), model.to_string()))
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cassette lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, entry: CassetteEntry) -> Result<()> {
        let _guard = self.writer.lock().expect("cassette writer lock");
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        self.entries
            .lock()
            .expect("cassette lock")
            .insert((entry.prompt_sha256, entry.model), entry.response);
        Ok(())
    }
}

/// Failure from a chat backend; `retryable` marks transport errors and 5xx.
#[derive(Debug, Clone)]
pub struct BackendError {
    pub retryable: bool,
    pub message: String,
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, config: &GatewayConfig, messages: &[ChatMessage]) -> std::result::Result<String, BackendError>;
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Gateway(e.to_string()))?;
        Ok(HttpBackend { client })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

impl ChatBackend for HttpBackend {
    fn chat(&self, config: &GatewayConfig, messages: &[ChatMessage]) -> std::result::Result<String, BackendError> {
        let fatal = |message: String| BackendError { retryable: false, message };
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| fatal(format!("credential variable {} is not set", config.api_key_env)))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": config.model,
            "messages": messages,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        });
        let resp = self
            .client
            .post(url)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| BackendError { retryable: true, message: e.to_string() })?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(BackendError {
                retryable: true,
                message: format!("server returned {status}"),
            });
        }
        if !status.is_success() {
            return Err(fatal(format!("server returned {status}")));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| BackendError { retryable: true, message: e.to_string() })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| fatal("response has no choices".into()))
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore wait");
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    config: GatewayConfig,
    backend: Option<Box<dyn ChatBackend>>,
    cassette: Option<Cassette>,
    in_flight: Semaphore,
    jitter: Mutex<ChaCha8Rng>,
}

impl Gateway {
    /// Gateway with the HTTP backend for live/record modes.
    pub fn new(config: GatewayConfig) -> Result<Self> {
        let backend: Option<Box<dyn ChatBackend>> = match config.mode {
            GatewayMode::Replay => None,
            _ => Some(Box::new(HttpBackend::new(Duration::from_secs_f64(config.timeout_secs))?)),
        };
        Self::with_backend(config, backend)
    }

    pub fn with_backend(config: GatewayConfig, backend: Option<Box<dyn ChatBackend>>) -> Result<Self> {
        config.validate()?;
        if config.mode != GatewayMode::Replay && backend.is_none() {
            return Err(Error::Config(format!("{:?} mode requires a backend", config.mode)));
        }
        let cassette = config.cassette.as_deref().map(Cassette::open).transpose()?;
        Ok(Gateway {
            in_flight: Semaphore {
                free: Mutex::new(config.concurrency),
                cv: Condvar::new(),
            },
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
            backend,
            cassette,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn hash(&self, prompt: &Prompt) -> String {
        prompt_hash(&self.config.model, &prompt.messages())
    }

    /// Assistant text for `prompt`, from the cassette or the backend
    /// depending on the mode.
    pub fn complete(&self, prompt: &Prompt) -> Result<String> {
        let messages = prompt.messages();
        let hash = prompt_hash(&self.config.model, &messages);
        match self.config.mode {
            GatewayMode::Replay => {
                let cassette = self.cassette.as_ref().expect("validated");
                cassette
                    .get(&hash, &self.config.model)
                    .ok_or(Error::MissingCassetteEntry(hash))
            }
            GatewayMode::Record => {
                let cassette = self.cassette.as_ref().expect("validated");
                if let Some(hit) = cassette.get(&hash, &self.config.model) {
                    return Ok(hit);
                }
                let response = self.call_with_retry(&messages)?;
                cassette.append(CassetteEntry {
                    prompt_sha256: hash,
                    model: self.config.model.clone(),
                    response: response.clone(),
                })?;
                Ok(response)
            }
            GatewayMode::Live => self.call_with_retry(&messages),
        }
    }

    fn call_with_retry(&self, messages: &[ChatMessage]) -> Result<String> {
        let backend = self.backend.as_ref().expect("validated");
        let _slot = self.in_flight.acquire();
        let mut attempt = 0;
        loop {
            match backend.chat(&self.config, messages) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable && attempt < self.config.max_retries => {
                    let factor: f64 = self.jitter.lock().expect("jitter lock").random_range(0.5..1.5);
                    let delay = self.config.retry_base_secs * 2f64.powi(attempt as i32) * factor;
                    log::warn!("chat request failed ({}); retrying in {delay:.2}s", e.message);
                    std::thread::sleep(Duration::from_secs_f64(delay));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Gateway(format!(
                        "{} after {} attempt(s)",
                        e.message,
                        attempt + 1
                    )))
                }
            }
        }
    }
}
