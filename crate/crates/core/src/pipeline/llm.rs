// SPDX-License-Identifier: Apache-2.0

//! Model clients: a scripted in-memory mock, a directory-backed mock and an
//! HTTP client for chat-completion endpoints.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("no scripted response for prompt {0}")]
    NoResponse(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// A text-completion model.
pub trait LlmClient: Send + Sync {
    /// Prompt size the model accepts, in estimated tokens.
    fn context_budget(&self) -> usize;
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

/// Hex SHA-256 of a prompt; the key mocks use to look up responses.
pub fn prompt_hash(prompt: &str) -> String {
    let d = Sha256::digest(prompt.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// In-memory mock. Responses are looked up by prompt hash first, then taken
/// from a fallback queue; every prompt is logged.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    budget: usize,
    keyed: Mutex<HashMap<String, VecDeque<String>>>,
    queue: Mutex<VecDeque<String>>,
    /// Custom responder consulted after the keyed map and before the queue.
    responder: Option<fn(&str) -> Option<String>>,
    log: Mutex<Vec<String>>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(budget: usize) -> ScriptedClient {
        ScriptedClient {
            budget,
            ..ScriptedClient::default()
        }
    }

    /// Responses returned in order regardless of the prompt.
    pub fn with_queue(
        budget: usize,
        responses: impl IntoIterator<Item = impl Into<String>>,
    ) -> ScriptedClient {
        let c = ScriptedClient::new(budget);
        c.queue
            .lock()
            .expect("unpoisoned")
            .extend(responses.into_iter().map(Into::into));
        c
    }

    /// Answers every prompt through `f`; `None` is a missing response.
    pub fn with_responder(budget: usize, f: fn(&str) -> Option<String>) -> ScriptedClient {
        ScriptedClient {
            responder: Some(f),
            ..ScriptedClient::new(budget)
        }
    }

    /// Queues a response for one exact prompt.
    pub fn script(&self, prompt: &str, response: impl Into<String>) {
        self.keyed
            .lock()
            .expect("unpoisoned")
            .entry(prompt_hash(prompt))
            .or_default()
            .push_back(response.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.log.lock().expect("unpoisoned").clone()
    }
}

impl LlmClient for ScriptedClient {
    fn context_budget(&self) -> usize {
        self.budget
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log
            .lock()
            .expect("unpoisoned")
            .push(prompt.to_string());
        let h = prompt_hash(prompt);
        if let Some(r) = self
            .keyed
            .lock()
            .expect("unpoisoned")
            .get_mut(&h)
            .and_then(VecDeque::pop_front)
        {
            return Ok(r);
        }
        if let Some(r) = self.responder.and_then(|f| f(prompt)) {
            return Ok(r);
        }
        self.queue
            .lock()
            .expect("unpoisoned")
            .pop_front()
            .ok_or(LlmError::NoResponse(h))
    }
}

/// Mock that reads `<hash>.txt` from a directory, or `<hash>.<n>.txt` for
/// the n-th (0-based) repetition of the same prompt. Missing responses are
/// errors; the prompt is then written to `<hash>.prompt` to ease scripting.
#[derive(Debug)]
pub struct FileMockClient {
    dir: PathBuf,
    budget: usize,
    seen: Mutex<BTreeMap<String, usize>>,
}

impl FileMockClient {
    pub fn new(dir: impl Into<PathBuf>, budget: usize) -> FileMockClient {
        FileMockClient {
            dir: dir.into(),
            budget,
            seen: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl LlmClient for FileMockClient {
    fn context_budget(&self) -> usize {
        self.budget
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let h = prompt_hash(prompt);
        let n = {
            let mut seen = self.seen.lock().expect("unpoisoned");
            let e = seen.entry(h.clone()).or_insert(0);
            *e += 1;
            *e - 1
        };
        for name in [format!("{h}.{n}.txt"), format!("{h}.txt")] {
            if let Ok(text) = std::fs::read_to_string(self.dir.join(&name)) {
                return Ok(text);
            }
        }
        if let Err(e) = std::fs::write(self.dir.join(format!("{h}.prompt")), prompt) {
            log::debug!("could not record missing prompt {h}: {e}");
        }
        Err(LlmError::NoResponse(h))
    }
}

/// Settings for [`HttpClient`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSettings {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub context_budget: usize,
    pub timeout_secs: u64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "default".into(),
            token_env: "S3DIFF_LLM_TOKEN".into(),
            context_budget: 8192,
            timeout_secs: 120,
        }
    }
}

/// Client for OpenAI-style chat-completion endpoints.
#[cfg(feature = "http")]
#[derive(Debug)]
pub struct HttpClient {
    settings: HttpSettings,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpClient {
    pub fn new(settings: HttpSettings) -> HttpClient {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(settings.timeout_secs)))
            .build();
        HttpClient {
            settings,
            agent: config.into(),
        }
    }

    fn request_body(&self, prompt: &str) -> serde_json::Value {
        serde_json::json!({
            "model": self.settings.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        })
    }
}

#[cfg(feature = "http")]
impl LlmClient for HttpClient {
    fn context_budget(&self) -> usize {
        self.settings.context_budget
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let mut req = self
            .agent
            .post(&self.settings.endpoint)
            .header("Content-Type", "application/json");
        let token = std::env::var(&self.settings.token_env).ok();
        if let Some(t) = &token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::to_string(&self.request_body(prompt))
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        let mut resp = req
            .send(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))
    }
}

/// Code from the first fenced block of a response, or the whole response
/// when it has no fence.
pub fn extract_code(response: &str) -> &str {
    let Some(open) = response.find("```") else {
        return response;
    };
    let after = &response[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |p| p + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_client_prefers_keyed_responses() {
        let c = ScriptedClient::with_queue(100, ["q1", "q2"]);
        c.script("hello", "keyed");
        assert_eq!(c.complete("other").unwrap(), "q1");
        assert_eq!(c.complete("hello").unwrap(), "keyed");
        assert_eq!(c.complete("hello").unwrap(), "q2");
        assert!(matches!(c.complete("hello"), Err(LlmError::NoResponse(_))));
        assert_eq!(c.calls(), 4);
    }

    #[test]
    fn file_mock_reads_by_hash_and_repetition() {
        let dir = tempfile::tempdir().unwrap();
        let h = prompt_hash("p");
        std::fs::write(dir.path().join(format!("{h}.txt")), "any").unwrap();
        std::fs::write(dir.path().join(format!("{h}.0.txt")), "first").unwrap();
        let c = FileMockClient::new(dir.path(), 10);
        assert_eq!(c.complete("p").unwrap(), "first");
        assert_eq!(c.complete("p").unwrap(), "any");
        assert!(c.complete("q").is_err());
        assert!(dir
            .path()
            .join(format!("{}.prompt", prompt_hash("q")))
            .exists());
    }

    #[test]
    fn fenced_code_is_extracted() {
        assert_eq!(
            extract_code("text\n```rust\nfn f() {}\n```\nmore"),
            "fn f() {}\n"
        );
        assert_eq!(extract_code("fn g() {}"), "fn g() {}");
    }
}
