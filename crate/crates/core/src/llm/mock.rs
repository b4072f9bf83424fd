//! Deterministic mock backend.
//!
//! List mode consumes canned replies in order; map mode keys replies by a
//! stable digest of the rendered request, which is also how recorded
//! transcripts replay.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{read_transcript, ChatBackend, CompletionRequest, LlmError};

/// Stable digest of a request (model, messages, temperature, n).
pub fn prompt_digest(req: &CompletionRequest) -> String {
    let canonical = serde_json::to_string(req).expect("request serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// One scripted outcome.
#[derive(Debug, Clone)]
pub enum MockReply {
    Text(String),
    /// Reported as a retryable failure; used to exercise retry paths.
    TransientFailure(String),
}

enum Script {
    List(Mutex<std::vec::IntoIter<MockReply>>),
    Map(BTreeMap<String, String>),
}

/// Fully deterministic scripted backend.
pub struct MockBackend {
    script: Script,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn from_replies(replies: impl Into<Vec<MockReply>>) -> Self {
        Self { script: Script::List(Mutex::new(replies.into().into_iter())), calls: AtomicUsize::new(0) }
    }

    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_replies(texts.into_iter().map(|t| MockReply::Text(t.into())).collect::<Vec<_>>())
    }

    /// Map mode: responses keyed by [`prompt_digest`].
    pub fn from_map(map: BTreeMap<String, String>) -> Self {
        Self { script: Script::Map(map), calls: AtomicUsize::new(0) }
    }

    /// Replays a recorded transcript: each successful exchange becomes a
    /// digest -> response entry.
    pub fn from_transcript(path: &Path) -> Result<Self, LlmError> {
        let mut map = BTreeMap::new();
        for entry in read_transcript(path)? {
            if let Some(response) = entry.response {
                map.insert(prompt_digest(&entry.request), response);
            }
        }
        Ok(Self::from_map(map))
    }

    /// Total completed calls (including scripted failures).
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.script {
            Script::List(iter) => {
                let next = iter.lock().expect("script lock").next();
                match next {
                    None => Err(LlmError::ScriptExhausted),
                    Some(MockReply::Text(t)) => Ok(t),
                    Some(MockReply::TransientFailure(msg)) => {
                        Err(LlmError::Transient { status: Some(503), message: msg })
                    }
                }
            }
            Script::Map(map) => {
                let digest = prompt_digest(req);
                map.get(&digest).cloned().ok_or(LlmError::DigestMiss { digest })
            }
        }
    }
}
