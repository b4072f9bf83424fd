//! Blocking HTTP backend speaking the common chat-completions JSON shape.

use std::time::Duration;

use serde::Deserialize;

use super::{BackendConfig, ChatBackend, CompletionRequest, LlmError};

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

pub struct HttpBackend {
    cfg: BackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    /// Validates the config and resolves the API key from the environment,
    /// failing fast before any network call.
    pub fn new(cfg: BackendConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env)
            .map_err(|_| LlmError::Config(format!("API key env var {} is not set", cfg.api_key_env)))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(Self { cfg, api_key, client })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let response = self
            .client
            .post(&self.cfg.endpoint)
            .bearer_auth(&self.api_key)
            .json(req)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() {
                    LlmError::Transient { status: None, message: e.to_string() }
                } else {
                    LlmError::Permanent { status: None, message: e.to_string() }
                }
            })?;

        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(LlmError::Transient { status: Some(status.as_u16()), message: status.to_string() });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(LlmError::Permanent { status: Some(status.as_u16()), message: body });
        }

        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| LlmError::Permanent { status: Some(status.as_u16()), message: format!("malformed response: {e}") })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::Permanent { status: Some(status.as_u16()), message: "empty choices array".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(key_env: &str) -> BackendConfig {
        BackendConfig {
            endpoint: "http://localhost:0/v1/chat/completions".into(),
            api_key_env: key_env.into(),
            timeout_secs: 1.0,
            max_retries: 0,
            backoff_base_secs: 0.0,
        }
    }

    #[test]
    fn missing_key_fails_before_any_network_call() {
        match HttpBackend::new(cfg("SEARCHSIM_TEST_KEY_THAT_IS_UNSET")) {
            Err(LlmError::Config(msg)) => assert!(msg.contains("SEARCHSIM_TEST_KEY_THAT_IS_UNSET")),
            other => panic!("expected config error, got {:?}", other.err()),
        }
    }

    #[test]
    fn zero_timeout_rejected() {
        let mut c = cfg("ANY");
        c.timeout_secs = 0.0;
        assert!(matches!(c.validate(), Err(LlmError::Config(_))));
    }

    #[test]
    fn api_key_never_reaches_the_transcript() {
        use super::super::{ChatMessage, Client, CompletionRequest};

        let secret = "sk-sentinel-5cf1e6d0";
        std::env::set_var("SEARCHSIM_HTTP_TEST_KEY", secret);
        let backend = HttpBackend::new(cfg("SEARCHSIM_HTTP_TEST_KEY")).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let client = Client::new(Box::new(backend), 0, std::time::Duration::ZERO)
            .with_transcript(&path)
            .unwrap();
        // The unroutable endpoint fails fast; the failed exchange is still
        // logged and must not contain key material.
        let req = CompletionRequest::new("m", vec![ChatMessage::user("hello")]);
        assert!(client.complete(&req).is_err());

        let bytes = std::fs::read_to_string(&path).unwrap();
        assert!(!bytes.is_empty(), "failed calls are logged too");
        assert!(!bytes.contains(secret), "api key leaked into the transcript");
    }
}
