//! Provider-agnostic chat-completion client.
//!
//! A [`Client`] wraps any [`ChatBackend`] with retry (exponential backoff on
//! transient failures) and mandatory transcript logging: every call appends
//! one JSON record `{request, response, error?, latency_ms, attempts}` to a
//! line-delimited file. Transcripts replay as map-mode mocks
//! ([`mock::MockBackend::from_transcript`]), turning any real run into a
//! regression fixture.
//!
//! The HTTP backend speaks the de-facto chat-completions shape (messages
//! array in, choices array out) so hosted and local endpoints plug in
//! without adapters.

pub mod http;
pub mod mock;

use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpBackend;
pub use mock::{prompt_digest, MockBackend, MockReply};

/// Environment variable overriding transcript paths.
pub const TRANSCRIPT_ENV: &str = "SESSION_SIM_TRANSCRIPT";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transient backend failure{}: {message}", fmt_status(.status))]
    Transient { status: Option<u16>, message: String },
    #[error("backend failure{}: {message}", fmt_status(.status))]
    Permanent { status: Option<u16>, message: String },
    #[error("mock script exhausted")]
    ScriptExhausted,
    #[error("no scripted response for prompt digest {digest}")]
    DigestMiss { digest: String },
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
    #[error("transcript i/o: {0}")]
    Transcript(#[from] std::io::Error),
}

fn fmt_status(status: &Option<u16>) -> String {
    status.map(|s| format!(" (status {s})")).unwrap_or_default()
}

impl LlmError {
    /// Errors worth retrying: timeouts, connection resets, 5xx, rate limits.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transient { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// One chat-completion request. Defaults follow the evaluation setup:
/// temperature 0, a single choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub n: u32,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self { model: model.into(), messages, temperature: 0.0, n: 1 }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::Config("request has no messages".into()));
        }
        if self.n < 1 {
            return Err(LlmError::Config("n must be >= 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        for m in &self.messages {
            if m.role != Role::Assistant && m.content.is_empty() {
                return Err(LlmError::Config("user/system message content must be non-empty".into()));
            }
        }
        Ok(())
    }
}

/// Remote backend settings. The API key is read from the named environment
/// variable at construction time, never stored in configs or transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_secs: f64,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> f64 {
    0.5
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !self.timeout_secs.is_finite() || self.timeout_secs <= 0.0 {
            return Err(LlmError::Config(format!("timeout must be > 0, got {}", self.timeout_secs)));
        }
        Ok(())
    }
}

/// Anything that can answer a completion request.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError>;
}

#[derive(Debug, Serialize)]
struct TranscriptRecord<'a> {
    request: &'a CompletionRequest,
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    latency_ms: u64,
    attempts: u32,
}

/// Owned form of a transcript line, used for replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: CompletionRequest,
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// Reads a transcript file back into entries.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let entry: TranscriptEntry = serde_json::from_str(line)
            .map_err(|e| LlmError::Config(format!("malformed transcript line: {e}")))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Retrying, transcript-logging wrapper around a backend.
pub struct Client {
    backend: Box<dyn ChatBackend>,
    max_retries: u32,
    backoff_base: Duration,
    transcript: Option<Mutex<File>>,
    /// Mock runs keep latency at 0 so transcripts are byte-reproducible.
    record_latency: bool,
}

impl Client {
    /// Client over a deterministic mock: no backoff waits, zeroed latency.
    pub fn mock(backend: MockBackend) -> Self {
        Self {
            backend: Box::new(backend),
            max_retries: 3,
            backoff_base: Duration::ZERO,
            transcript: None,
            record_latency: false,
        }
    }

    /// Client over an arbitrary backend with explicit retry settings.
    pub fn new(backend: Box<dyn ChatBackend>, max_retries: u32, backoff_base: Duration) -> Self {
        Self { backend, max_retries, backoff_base, transcript: None, record_latency: true }
    }

    /// Client over HTTP per the backend config (fails fast on a missing key).
    pub fn remote(cfg: &BackendConfig) -> Result<Self, LlmError> {
        let backend = HttpBackend::new(cfg.clone())?;
        Ok(Self::new(Box::new(backend), cfg.max_retries, Duration::from_secs_f64(cfg.backoff_base_secs)))
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    /// Enables transcript logging. `SESSION_SIM_TRANSCRIPT` overrides the path.
    pub fn with_transcript(mut self, path: &Path) -> Result<Self, LlmError> {
        let path: PathBuf = std::env::var_os(TRANSCRIPT_ENV).map(PathBuf::from).unwrap_or_else(|| path.to_owned());
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript = Some(Mutex::new(file));
        Ok(self)
    }

    fn log(&self, req: &CompletionRequest, outcome: &Result<String, LlmError>, latency: Duration, attempts: u32) {
        let Some(file) = &self.transcript else { return };
        let record = TranscriptRecord {
            request: req,
            response: outcome.as_deref().ok(),
            error: outcome.as_ref().err().map(ToString::to_string),
            latency_ms: if self.record_latency { latency.as_millis() as u64 } else { 0 },
            attempts,
        };
        let line = serde_json::to_string(&record).expect("transcript record serializes");
        if let Ok(mut f) = file.lock() {
            let _ = writeln!(f, "{line}");
        }
    }

    /// Returns the first choice's content. Transient failures are retried up
    /// to `max_retries` times with exponentially growing, non-decreasing
    /// backoff; the full exchange is appended to the transcript.
    pub fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        req.validate()?;
        let started = Instant::now();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match self.backend.complete(req) {
                Ok(text) => break Ok(text),
                Err(err) if err.is_transient() && attempts <= self.max_retries => {
                    let delay = self.backoff_base * 2u32.saturating_pow(attempts - 1);
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                }
                Err(err) if err.is_transient() => {
                    break Err(LlmError::RetriesExhausted { attempts, last: Box::new(err) });
                }
                Err(err) => break Err(err),
            }
        };
        self.log(req, &outcome, started.elapsed(), attempts);
        outcome
    }
}

/// One-shot convenience over [`Client::remote`].
pub fn complete(cfg: &BackendConfig, req: &CompletionRequest) -> Result<String, LlmError> {
    cfg.validate()?;
    Client::remote(cfg)?.complete(req)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> CompletionRequest {
        CompletionRequest::new("test-model", vec![ChatMessage::user(prompt)])
    }

    #[test]
    fn scripted_list_responses_in_order() {
        let client = Client::mock(MockBackend::from_texts(["hello"]));
        assert_eq!(client.complete(&req("hi")).unwrap(), "hello");
    }

    #[test]
    fn retry_until_scripted_success() {
        let backend = MockBackend::from_replies([
            MockReply::TransientFailure("busy".into()),
            MockReply::TransientFailure("busy".into()),
            MockReply::Text("ok".into()),
        ]);
        let client = Client::mock(backend);
        assert_eq!(client.complete(&req("x")).unwrap(), "ok");
    }

    #[test]
    fn retries_bounded_by_max() {
        let backend = MockBackend::from_replies(vec![MockReply::TransientFailure("busy".into()); 10]);
        let mut client = Client::mock(backend);
        client.max_retries = 2;
        match client.complete(&req("x")) {
            Err(LlmError::RetriesExhausted { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected retries exhausted, got {other:?}"),
        }
    }

    #[test]
    fn exhausted_script_is_an_error() {
        let client = Client::mock(MockBackend::from_texts::<[&str; 0], _>([]));
        assert!(matches!(client.complete(&req("x")), Err(LlmError::ScriptExhausted)));
    }

    #[test]
    fn request_validation() {
        let client = Client::mock(MockBackend::from_texts(["y"]));
        let empty = CompletionRequest::new("m", vec![]);
        assert!(matches!(client.complete(&empty), Err(LlmError::Config(_))));

        let blank = CompletionRequest::new("m", vec![ChatMessage::user("")]);
        assert!(matches!(client.complete(&blank), Err(LlmError::Config(_))));
    }

    #[test]
    fn transcript_records_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let client = Client::mock(MockBackend::from_texts(["alpha", "beta"]))
            .with_transcript(&path)
            .unwrap();
        client.complete(&req("first")).unwrap();
        client.complete(&req("second")).unwrap();

        let entries = read_transcript(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].response.as_deref(), Some("alpha"));
        assert_eq!(entries[0].attempts, 1);
        assert_eq!(entries[0].latency_ms, 0, "mock latency is pinned to zero");

        // Replay the transcript as a map-mode mock.
        let replay = Client::mock(MockBackend::from_transcript(&path).unwrap());
        assert_eq!(replay.complete(&req("second")).unwrap(), "beta");
        assert_eq!(replay.complete(&req("first")).unwrap(), "alpha");
    }

    #[test]
    fn transcript_contains_only_documented_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let client = Client::mock(MockBackend::from_texts(["resp"])).with_transcript(&path).unwrap();
        client.complete(&req("prompt text")).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let value: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["attempts", "latency_ms", "request", "response"]);
    }

    #[test]
    fn identical_runs_produce_identical_transcripts() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for name in ["a.jsonl", "b.jsonl"] {
            let path = dir.path().join(name);
            let client = Client::mock(MockBackend::from_texts(["one", "two"]))
                .with_transcript(&path)
                .unwrap();
            client.complete(&req("p1")).unwrap();
            client.complete(&req("p2")).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
    }
}
