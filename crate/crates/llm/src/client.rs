//! Chat-completion provider interface and the scripted offline stub.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// Passed through to the provider verbatim (temperature etc.). Empty
    /// means provider defaults.
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ChatRequest {
    pub fn single_turn(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        ChatRequest { model: model.into(), messages: vec![ChatMessage::user(prompt)], params: Default::default() }
    }

    /// Content of the (single) user message.
    pub fn prompt(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == "user").map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    /// Retries spent before the successful attempt.
    pub retries: u32,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status} after {attempts} attempt(s)")]
    Status { status: u16, attempts: u32 },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("script exhausted after {calls} call(s)")]
    ScriptExhausted { calls: usize },
    #[error("provider not configured: {0}")]
    Config(String),
}

/// Anything that can answer a single-turn chat request.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, ClientError>;
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, ClientError> {
        (**self).complete(req)
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, ClientError> {
        (**self).complete(req)
    }
}

/// Replays canned responses in order and records every prompt it receives.
#[derive(Default)]
pub struct ScriptedProvider {
    script: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl fmt::Debug for ScriptedProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScriptedProvider")
            .field("remaining", &self.script.lock().unwrap().len())
            .field("calls", &self.prompts.lock().unwrap().len())
            .finish()
    }
}

/// Build a provider that replays `responses`.
pub fn scripted_stub<I, S>(responses: I) -> ScriptedProvider
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    ScriptedProvider {
        script: Mutex::new(responses.into_iter().map(Into::into).collect()),
        prompts: Mutex::new(Vec::new()),
    }
}

impl ScriptedProvider {
    pub fn recorded_prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, ClientError> {
        let mut prompts = self.prompts.lock().unwrap();
        prompts.push(req.prompt().to_string());
        let calls = prompts.len();
        let text = self.script.lock().unwrap().pop_front().ok_or(ClientError::ScriptExhausted { calls })?;
        Ok(Completion { text, usage: Usage::default() })
    }
}
