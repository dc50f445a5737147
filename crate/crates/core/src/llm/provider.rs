//! Completion backends: recorded transcripts for offline runs and an HTTP
//! chat endpoint for live runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::keyword;
use super::prompts::PromptBundle;
use super::templates::PromptKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no recorded transcript for {kind} prompt with digest {digest}")]
    TranscriptMissing { kind: String, digest: String },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Failed { attempts: u32, message: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("transcript store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, ProviderError>;
}

/// Offline provider: returns recorded transcripts keyed by
/// `(kind, prompt digest)`. Classification prompts without a recording are
/// answered by a keyword rule over the environment and instruction.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    transcripts: BTreeMap<(PromptKind, String), String>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kind: PromptKind, digest: impl Into<String>, text: impl Into<String>) {
        self.transcripts.insert((kind, digest.into()), text.into());
    }

    /// Registers `text` as the answer to `prompt`.
    pub fn register_for(&mut self, prompt: &PromptBundle, text: impl Into<String>) {
        self.register(prompt.kind, prompt.digest(), text);
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    /// File name a transcript for `prompt` is stored under.
    pub fn file_name(kind: PromptKind, digest: &str) -> String {
        format!("{}-{digest}.txt", kind.slug())
    }

    /// Loads every `<kind>-<digest>.txt` file in `dir`. Other files are
    /// ignored.
    pub fn from_dir(dir: &Path) -> Result<MockProvider, ProviderError> {
        let mut out = MockProvider::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| ProviderError::Store(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry.map_err(|e| ProviderError::Store(e.to_string()))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".txt") else {
                continue;
            };
            let Some((slug, digest)) = stem.rsplit_once('-') else {
                continue;
            };
            let Some(kind) = PromptKind::from_slug(slug) else {
                continue;
            };
            let text = std::fs::read_to_string(entry.path())
                .map_err(|e| ProviderError::Store(format!("{name}: {e}")))?;
            out.register(kind, digest, text);
        }
        Ok(out)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), ProviderError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| ProviderError::Store(format!("{}: {e}", dir.display())))?;
        for ((kind, digest), text) in &self.transcripts {
            let p = dir.join(Self::file_name(*kind, digest));
            std::fs::write(&p, text)
                .map_err(|e| ProviderError::Store(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

impl Provider for MockProvider {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, ProviderError> {
        let digest = prompt.digest();
        if let Some(text) = self.transcripts.get(&(prompt.kind, digest.clone())) {
            return Ok(Completion {
                text: text.clone(),
                attempts: 1,
            });
        }
        if prompt.kind == PromptKind::Classify {
            if let Some(text) = keyword::classify_prompt(prompt) {
                return Ok(Completion { text, attempts: 1 });
            }
        }
        Err(ProviderError::TranscriptMissing {
            kind: prompt.kind.slug().to_string(),
            digest,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            timeout_secs: 60.0,
            max_retries: 2,
            temperature: 0.0,
            api_key: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        if self.endpoint.is_empty() {
            return Err(ProviderError::Config("endpoint is empty".into()));
        }
        Ok(())
    }
}

/// Chat request in the common `messages` shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: &'static str,
    pub content: String,
}

impl ChatRequest {
    pub fn new(config: &ProviderConfig, prompt: &PromptBundle) -> Self {
        ChatRequest {
            model: config.model.clone(),
            temperature: config.temperature,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: prompt.system.clone(),
                },
                ChatMessage {
                    role: "user",
                    content: prompt.render_attachments(),
                },
            ],
        }
    }
}

/// One request/response exchange with the endpoint.
pub trait Transport: Send + Sync {
    fn send(&self, config: &ProviderConfig, request: &ChatRequest) -> Result<String, String>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default, Clone)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(&self, config: &ProviderConfig, request: &ChatRequest) -> Result<String, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        let mut req = agent.post(&config.endpoint);
        if let Some(key) = &config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| e.to_string())?;
        let v: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

/// Live provider with retries. Temperature defaults to 0.
pub struct LiveProvider<T: Transport = HttpTransport> {
    pub config: ProviderConfig,
    transport: T,
}

impl LiveProvider<HttpTransport> {
    pub fn http(config: ProviderConfig) -> Result<Self, ProviderError> {
        Self::with_transport(config, HttpTransport)
    }
}

impl<T: Transport> LiveProvider<T> {
    pub fn with_transport(config: ProviderConfig, transport: T) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(LiveProvider { config, transport })
    }
}

impl<T: Transport> Provider for LiveProvider<T> {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, ProviderError> {
        let request = ChatRequest::new(&self.config, prompt);
        let max = self.config.max_retries.saturating_add(1);
        let mut last = String::new();
        for attempt in 1..=max {
            match self.transport.send(&self.config, &request) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        attempts: attempt,
                    })
                }
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "provider call failed");
                    last = e;
                }
            }
        }
        Err(ProviderError::Failed {
            attempts: max,
            message: last,
        })
    }
}
