//! Uniform access to chat, transcription, speech synthesis and embedding.
//!
//! Every backend sits behind a small trait so the engine can run against
//! live OpenAI-compatible endpoints or a scripted [`mock::MockProvider`].
//! The [`Gateway`] adds the retry policy, structured-reply parsing with one
//! corrective reprompt, and a trace of which template produced each call.

pub mod http;
pub mod mock;
pub mod reply;
pub mod template;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reply::{DependencyStatus, DependencyVerdict, Parsed, Schema, StructuredReply};
pub use template::{Bindings, PromptLibrary, Template, TemplateError, TemplateId};

use crate::segment::AudioRef;

/// Appended to a prompt whose reply could not be parsed.
pub const JSON_REPROMPT: &str =
    "\n\nYour previous reply could not be parsed. Return only valid JSON matching the OUTPUT FORMAT above, with no other text.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Chat,
    Transcribe,
    Synthesize,
    Embed,
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Capability::Chat => "chat",
            Capability::Transcribe => "transcribe",
            Capability::Synthesize => "synthesize",
            Capability::Embed => "embed",
        })
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Retryable failure such as a timeout or a 5xx response.
    #[error("{capability} transport error: {message}")]
    Transport { capability: Capability, message: String },
    #[error("provider unavailable ({capability}): {message}")]
    Unavailable { capability: Capability, message: String },
    #[error("malformed model output: {reason}")]
    MalformedOutput { raw: String, reason: String },
    #[error("empty segment")]
    EmptySegment,
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("mock script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("invalid provider config: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport { .. })
    }
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, template: TemplateId, prompt: &str) -> Result<String, ProviderError>;
}

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, audio: &AudioRef) -> Result<String, ProviderError>;
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, text: &str, voice: &str) -> Result<Vec<u8>, ProviderError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Provider settings as they appear in the service config document.
///
/// A capability with an endpoint is live; without one it is served by the
/// mock script. Setting neither leaves it unconfigured. Environment
/// variables `STEPFLOW_API_KEY`, `STEPFLOW_ENDPOINT` and
/// `STEPFLOW_<CAPABILITY>_ENDPOINT` override the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub chat_endpoint: Option<String>,
    pub transcribe_endpoint: Option<String>,
    pub synthesize_endpoint: Option<String>,
    pub embed_endpoint: Option<String>,
    pub chat_model: String,
    /// Per-template chat model, e.g. a different model for fact checking.
    pub template_models: HashMap<TemplateId, String>,
    pub transcribe_model: String,
    pub tts_model: String,
    pub tts_voice: String,
    pub embed_model: String,
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    pub retry_count: u32,
    pub retry_backoff_ms: u64,
    pub mock_script_path: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            chat_endpoint: None,
            transcribe_endpoint: None,
            synthesize_endpoint: None,
            embed_endpoint: None,
            chat_model: "gpt-4.1-mini".into(),
            template_models: HashMap::from([
                (TemplateId::FactCheck, "gpt-4o-mini".to_owned()),
                (TemplateId::ToneClassification, "gpt-4.1".to_owned()),
            ]),
            transcribe_model: "whisper-1".into(),
            tts_model: "tts-1".into(),
            tts_voice: "alloy".into(),
            embed_model: "gte-Qwen1.5-7B-instruct".into(),
            api_key: None,
            timeout_ms: 30_000,
            retry_count: 2,
            retry_backoff_ms: 250,
            mock_script_path: None,
            prompt_dir: None,
        }
    }
}

impl ProviderConfig {
    /// Applies environment overrides on top of the document values.
    pub fn with_env(mut self) -> Self {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        if let Some(key) = var("STEPFLOW_API_KEY").or_else(|| var("OPENAI_API_KEY")) {
            self.api_key = Some(key);
        }
        if let Some(base) = var("STEPFLOW_ENDPOINT") {
            self.chat_endpoint = Some(base.clone());
            self.transcribe_endpoint = Some(base.clone());
            self.synthesize_endpoint = Some(base.clone());
            self.embed_endpoint = Some(base);
        }
        for (name, slot) in [
            ("STEPFLOW_CHAT_ENDPOINT", &mut self.chat_endpoint),
            ("STEPFLOW_TRANSCRIBE_ENDPOINT", &mut self.transcribe_endpoint),
            ("STEPFLOW_SYNTHESIZE_ENDPOINT", &mut self.synthesize_endpoint),
            ("STEPFLOW_EMBED_ENDPOINT", &mut self.embed_endpoint),
        ] {
            if let Some(v) = var(name) {
                *slot = Some(v);
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub retries: u32,
    pub backoff_ms: u64,
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { retries: 0, backoff_ms: 0 }
    }

    fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1 << attempt.min(16)))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 2, backoff_ms: 250 }
    }
}

/// A rendered prompt together with the template it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub template: TemplateId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub capability: Capability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateId>,
    pub ok: bool,
}

struct Unconfigured(Capability);

impl Unconfigured {
    fn err(&self) -> ProviderError {
        ProviderError::Unavailable { capability: self.0, message: "capability not configured".into() }
    }
}

impl ChatModel for Unconfigured {
    fn complete(&self, _: TemplateId, _: &str) -> Result<String, ProviderError> {
        Err(self.err())
    }
}
impl Transcriber for Unconfigured {
    fn transcribe(&self, _: &AudioRef) -> Result<String, ProviderError> {
        Err(self.err())
    }
}
impl Synthesizer for Unconfigured {
    fn synthesize(&self, _: &str, _: &str) -> Result<Vec<u8>, ProviderError> {
        Err(self.err())
    }
}
impl Embedder for Unconfigured {
    fn embed(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
        Err(self.err())
    }
}

/// Backends and policy for one session. Mock call counters live in the
/// backends, so build one gateway per session for reproducible runs.
pub struct Gateway {
    chat: Arc<dyn ChatModel>,
    transcriber: Arc<dyn Transcriber>,
    synthesizer: Arc<dyn Synthesizer>,
    embedder: Arc<dyn Embedder>,
    prompts: Arc<PromptLibrary>,
    retry: RetryPolicy,
    voice: String,
    trace: Mutex<Vec<CallRecord>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("retry", &self.retry).field("voice", &self.voice).finish_non_exhaustive()
    }
}

impl Gateway {
    /// A gateway whose every capability is served by `provider`.
    pub fn from_provider<P>(provider: Arc<P>) -> Self
    where
        P: ChatModel + Transcriber + Synthesizer + Embedder + 'static,
    {
        Self {
            chat: provider.clone(),
            transcriber: provider.clone(),
            synthesizer: provider.clone(),
            embedder: provider,
            prompts: Arc::new(PromptLibrary::builtin()),
            retry: RetryPolicy::none(),
            voice: "alloy".into(),
            trace: Mutex::new(Vec::new()),
        }
    }

    /// Convenience for tests: a mock gateway with no retry delay.
    pub fn mock(script: mock::MockScript) -> Self {
        Self::from_provider(Arc::new(mock::MockProvider::new(script)))
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let prompts = match &config.prompt_dir {
            Some(dir) => PromptLibrary::load_dir(dir)?,
            None => PromptLibrary::builtin(),
        };
        let mock = match &config.mock_script_path {
            Some(path) => Some(Arc::new(mock::MockProvider::new(mock::MockScript::load(path)?))),
            None => None,
        };
        let live = |endpoint: &Option<String>, model: &str| -> Result<Option<http::HttpBackend>, ProviderError> {
            endpoint
                .as_deref()
                .map(|e| http::HttpBackend::new(e, model, config.api_key.clone(), config.timeout_ms))
                .transpose()
        };

        let chat: Arc<dyn ChatModel> = match (live(&config.chat_endpoint, &config.chat_model)?, &mock) {
            (Some(b), _) => Arc::new(b.with_model_overrides(config.template_models.clone())),
            (None, Some(m)) => m.clone(),
            (None, None) => Arc::new(Unconfigured(Capability::Chat)),
        };
        let transcriber: Arc<dyn Transcriber> =
            match (live(&config.transcribe_endpoint, &config.transcribe_model)?, &mock) {
                (Some(b), _) => Arc::new(b),
                (None, Some(m)) => m.clone(),
                (None, None) => Arc::new(Unconfigured(Capability::Transcribe)),
            };
        let synthesizer: Arc<dyn Synthesizer> = match (live(&config.synthesize_endpoint, &config.tts_model)?, &mock) {
            (Some(b), _) => Arc::new(b),
            (None, Some(m)) => m.clone(),
            (None, None) => Arc::new(Unconfigured(Capability::Synthesize)),
        };
        let embedder: Arc<dyn Embedder> = match (live(&config.embed_endpoint, &config.embed_model)?, &mock) {
            (Some(b), _) => Arc::new(b),
            (None, Some(m)) => m.clone(),
            (None, None) => Arc::new(Unconfigured(Capability::Embed)),
        };

        Ok(Self {
            chat,
            transcriber,
            synthesizer,
            embedder,
            prompts: Arc::new(prompts),
            retry: RetryPolicy { retries: config.retry_count, backoff_ms: config.retry_backoff_ms },
            voice: config.tts_voice.clone(),
            trace: Mutex::new(Vec::new()),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptLibrary) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub fn voice(&self) -> &str {
        &self.voice
    }

    /// Every call made through this gateway, in order.
    pub fn trace(&self) -> Vec<CallRecord> {
        self.trace.lock().clone()
    }

    /// Templates of the chat calls made so far, in order.
    pub fn chat_templates(&self) -> Vec<TemplateId> {
        self.trace.lock().iter().filter_map(|r| r.template).collect()
    }

    pub fn render(&self, template: TemplateId, bindings: &Bindings) -> Result<Prompt, ProviderError> {
        Ok(Prompt { template, text: self.prompts.render(template, bindings)? })
    }

    fn with_retries<T>(
        &self,
        capability: Capability,
        template: Option<TemplateId>,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            let result = call();
            self.trace.lock().push(CallRecord { capability, template, ok: result.is_ok() });
            match result {
                Err(e) if e.is_retryable() && attempt < self.retry.retries => {
                    tracing::warn!(%capability, attempt, error = %e, "retrying provider call");
                    let delay = self.retry.delay(attempt);
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    attempt += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(ProviderError::Unavailable {
                        capability,
                        message: format!("after {} attempts: {e}", attempt + 1),
                    })
                }
                other => return other,
            }
        }
    }

    /// Sends `text` to the chat model as-is.
    pub fn chat_raw(&self, template: TemplateId, text: &str) -> Result<String, ProviderError> {
        self.with_retries(Capability::Chat, Some(template), || self.chat.complete(template, text))
    }

    /// Sends a prompt and parses the reply against `schema`, reprompting
    /// once with a corrective instruction if parsing fails.
    pub fn chat_structured(&self, prompt: &Prompt, schema: Schema) -> Result<StructuredReply, ProviderError> {
        let raw = self.chat_raw(prompt.template, &prompt.text)?;
        match reply::parse(schema, &raw) {
            Ok(parsed) => return Ok(StructuredReply { raw_text: raw, parsed }),
            Err(reason) => tracing::debug!(%reason, "reprompting after unparseable reply"),
        }
        let retry_text = format!("{}{JSON_REPROMPT}", prompt.text);
        let raw = self.chat_raw(prompt.template, &retry_text)?;
        match reply::parse(schema, &raw) {
            Ok(parsed) => Ok(StructuredReply { raw_text: raw, parsed }),
            Err(reason) => Err(ProviderError::MalformedOutput { raw, reason }),
        }
    }

    pub fn transcribe(&self, audio: &AudioRef) -> Result<String, ProviderError> {
        if audio.samples.is_empty() {
            return Err(ProviderError::EmptySegment);
        }
        self.with_retries(Capability::Transcribe, None, || self.transcriber.transcribe(audio))
    }

    /// Uncached synthesis with the configured voice.
    pub fn synthesize(&self, text: &str) -> Result<Vec<u8>, ProviderError> {
        self.synthesize_with_voice(text, &self.voice.clone())
    }

    pub fn synthesize_with_voice(&self, text: &str, voice: &str) -> Result<Vec<u8>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput("synthesize"));
        }
        self.with_retries(Capability::Synthesize, None, || self.synthesizer.synthesize(text, voice))
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput("embed"));
        }
        self.with_retries(Capability::Embed, None, || self.embedder.embed(text))
    }

    /// Access to the embedder for metric computations.
    pub fn embedder(&self) -> Arc<dyn Embedder> {
        self.embedder.clone()
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
