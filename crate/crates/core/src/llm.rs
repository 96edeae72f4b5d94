//! Completion interface over deterministic mock backends and a remote
//! OpenAI-compatible completions endpoint.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use crate::chunker::token_count;
use crate::error::{Error, Result};
use crate::http;
use crate::pipeline::{CONTEXT_HEADER, QUESTION_MARKER};

pub const DEFAULT_MAX_NEW_TOKENS: usize = 256;
/// What `template_sql` answers for an unregistered question.
pub const UNKNOWN_SQL: &str = "SELECT NULL;";

#[derive(Debug, Clone, PartialEq)]
pub enum LlmBackend {
    /// Returns the prompt's context section verbatim.
    EchoContext,
    /// Looks the prompt's question line up in a question → SQL table.
    TemplateSql(BTreeMap<String, String>),
    Fixed(String),
    Http { endpoint_url: String, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub backend: LlmBackend,
    pub max_new_tokens: usize,
    pub temperature: f64,
}

impl LlmConfig {
    pub fn new(backend: LlmBackend) -> Self {
        LlmConfig {
            backend,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            temperature: 0.0,
        }
    }

    pub fn echo() -> Self {
        Self::new(LlmBackend::EchoContext)
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::new(LlmBackend::Fixed(text.into()))
    }

    pub fn template_sql<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self::new(LlmBackend::TemplateSql(
            pairs
                .into_iter()
                .map(|(q, s)| (q.into().trim().to_string(), s.into()))
                .collect(),
        ))
    }

    /// Reads a JSON object mapping question text to SQL.
    pub fn template_sql_from_file(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&raw)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(Self::template_sql(map))
    }

    pub fn http(endpoint_url: impl Into<String>) -> Self {
        Self::new(LlmBackend::Http {
            endpoint_url: endpoint_url.into(),
            timeout: http::DEFAULT_TIMEOUT,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub latency_ms: f64,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

/// A configured backend. Holds the connection pool for `http`, so reuse one
/// gateway across calls.
pub struct LlmGateway {
    config: LlmConfig,
    client: Option<Client>,
}

impl LlmGateway {
    pub fn new(config: LlmConfig) -> Result<Self> {
        if !(config.temperature >= 0.0) {
            return Err(Error::InvalidConfig("temperature must be nonnegative".into()));
        }
        if config.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("max_new_tokens must be positive".into()));
        }
        let client = match &config.backend {
            LlmBackend::Http {
                endpoint_url,
                timeout,
            } => {
                if endpoint_url.is_empty() {
                    return Err(Error::InvalidConfig("http llm needs an endpoint url".into()));
                }
                Some(http::client(*timeout)?)
            }
            _ => None,
        };
        Ok(LlmGateway { config, client })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn complete(&self, prompt: &str) -> Result<Completion> {
        if prompt.is_empty() {
            return Err(Error::InvalidInput("prompt is empty".into()));
        }
        let started = Instant::now();
        let text = match &self.config.backend {
            LlmBackend::EchoContext => echo_context(prompt)?.to_string(),
            LlmBackend::TemplateSql(map) => question_line(prompt)
                .and_then(|q| map.get(q.trim()))
                .cloned()
                .unwrap_or_else(|| UNKNOWN_SQL.to_string()),
            LlmBackend::Fixed(text) => text.clone(),
            LlmBackend::Http { endpoint_url, .. } => {
                let client = self.client.as_ref().expect("http gateway has a client");
                let body = CompletionRequest {
                    prompt,
                    max_tokens: self.config.max_new_tokens,
                    temperature: self.config.temperature,
                };
                let resp: CompletionResponse = http::post_json(client, endpoint_url, &body)?;
                resp.choices
                    .into_iter()
                    .next()
                    .map(|c| c.text)
                    .ok_or_else(|| Error::BackendUnavailable(format!("{endpoint_url}: no choices")))?
            }
        };
        Ok(Completion {
            prompt_tokens: token_count(prompt),
            completion_tokens: token_count(&text),
            // Local backends report zero so their traces are reproducible.
            latency_ms: match self.config.backend {
                LlmBackend::Http { .. } => started.elapsed().as_secs_f64() * 1e3,
                _ => 0.0,
            },
            text,
        })
    }
}

pub fn complete(prompt: &str, config: &LlmConfig) -> Result<Completion> {
    LlmGateway::new(config.clone())?.complete(prompt)
}

/// The text between the context header and the last question marker.
fn echo_context(prompt: &str) -> Result<&str> {
    let body = prompt.strip_prefix(CONTEXT_HEADER).ok_or(Error::MalformedPrompt)?;
    let end = body.rfind(QUESTION_MARKER).ok_or(Error::MalformedPrompt)?;
    Ok(&body[..end])
}

/// Rest of the last line that starts with `Question: `.
fn question_line(prompt: &str) -> Option<&str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix("Question: "))
}
