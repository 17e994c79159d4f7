//! Request/response transports: HTTP, record-and-replay cassettes and a
//! scripted queue.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::EndpointConfig;
use crate::context::Message;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// Canonical JSON used as the cassette key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    /// Thinking returned out of band (`reasoning_content`).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reasoning: Option<String>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self { content: content.into(), reasoning: None }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        (**self).complete(request)
    }
}

/// OpenAI-style `POST {base_url}/chat/completions`.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
    reasoning_content: Option<String>,
    reasoning: Option<String>,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> Result<Self> {
        let token = match &config.auth_token_env_var {
            Some(var) => Some(std::env::var(var).map_err(|_| Error::MissingToken(var.clone()))?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            token,
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(request).map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Error::Http { status, body });
        }
        let wire: WireResponse = serde_json::from_str(&body)?;
        let message = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Transport("response has no choices".into()))?
            .message;
        Ok(ChatResponse {
            content: message.content.unwrap_or_default(),
            reasoning: message.reasoning_content.or(message.reasoning).filter(|r| !r.is_empty()),
        })
    }
}

/// One request/response pair, one line of a cassette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ChatRequest,
    pub response: ChatResponse,
}

pub fn read_cassette(path: &Path) -> Result<Vec<Exchange>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Serves recorded responses by exact request. Repeated identical requests
/// are answered by successive recordings.
pub struct ReplayTransport {
    responses: HashMap<String, Vec<ChatResponse>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayTransport {
    pub fn new(exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        let mut responses: HashMap<String, Vec<ChatResponse>> = HashMap::new();
        for e in exchanges {
            responses.entry(e.request.key()).or_default().push(e.response);
        }
        Self { responses, cursors: Mutex::new(HashMap::new()) }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(Self::new(read_cassette(path)?))
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let key = request.key();
        let recorded = self.responses.get(&key).ok_or_else(|| Error::ReplayMiss(abbreviate(&key)))?;
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(key).or_default();
        let resp = recorded
            .get(*cursor)
            .ok_or_else(|| Error::ReplayMiss(format!("{} (all {} recordings used)", abbreviate(&request.key()), recorded.len())))?;
        *cursor += 1;
        Ok(resp.clone())
    }
}

fn abbreviate(key: &str) -> String {
    const MAX: usize = 160;
    match key.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &key[..i]),
        None => key.to_string(),
    }
}

/// Forwards to an inner transport and appends every exchange to a cassette.
pub struct RecordingTransport<T> {
    inner: T,
    sink: Mutex<File>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: &Path) -> Result<Self> {
        let sink = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, sink: Mutex::new(sink) })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let response = self.inner.complete(request)?;
        let mut line = serde_json::to_string(&Exchange { request: request.clone(), response: response.clone() })?;
        line.push('\n');
        self.sink.lock().expect("sink lock").write_all(line.as_bytes())?;
        Ok(response)
    }
}

/// Answers requests from a fixed queue in order, whatever they contain, and
/// keeps the requests for inspection.
#[derive(Default)]
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<ChatResponse>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(responses: impl IntoIterator<Item = ChatResponse>) -> Self {
        Self { queue: Mutex::new(responses.into_iter().collect()), seen: Mutex::default() }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("request log").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }
}

impl Transport for ScriptedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        self.seen.lock().expect("request log").push(request.clone());
        self.queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .ok_or_else(|| Error::ReplayMiss("scripted responses exhausted".into()))
    }
}
