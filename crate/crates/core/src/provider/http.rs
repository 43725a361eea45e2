//! OpenAI-compatible HTTP backends.

use std::collections::HashMap;
use std::time::Duration;

use reqwest::blocking::{multipart, Client};
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::mock::wav_bytes;
use super::{Capability, TemplateId, ChatModel, Embedder, ProviderError, Synthesizer, Transcriber};
use crate::segment::AudioRef;

#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    model_overrides: HashMap<TemplateId, String>,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout_ms: u64) -> Result<Self, ProviderError> {
        let client = Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| ProviderError::Unavailable {
                capability: Capability::Chat,
                message: format!("building HTTP client: {e}"),
            })?;
        Ok(Self {
            client,
            endpoint: endpoint.trim_end_matches('/').to_owned(),
            model: model.to_owned(),
            api_key,
            model_overrides: HashMap::new(),
        })
    }

    /// Uses a different chat model for prompts built from the given templates.
    pub fn with_model_overrides(mut self, overrides: HashMap<TemplateId, String>) -> Self {
        self.model_overrides = overrides;
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.endpoint)
    }

    fn send(
        &self,
        capability: Capability,
        request: reqwest::blocking::RequestBuilder,
    ) -> Result<reqwest::blocking::Response, ProviderError> {
        let request = match &self.api_key {
            Some(key) => request.bearer_auth(key),
            None => request,
        };
        let response = request.send().map_err(|e| ProviderError::Transport {
            capability,
            message: e.to_string(),
        })?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let body = response.text().unwrap_or_default();
        let message = format!("HTTP {status}: {body}");
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            Err(ProviderError::Transport { capability, message })
        } else {
            Err(ProviderError::Unavailable { capability, message })
        }
    }

    fn json(capability: Capability, response: reqwest::blocking::Response) -> Result<Value, ProviderError> {
        response.json().map_err(|e| ProviderError::Transport {
            capability,
            message: format!("decoding response: {e}"),
        })
    }

    fn shape_error(capability: Capability, what: &str) -> ProviderError {
        ProviderError::Unavailable { capability, message: format!("unexpected response shape: {what}") }
    }
}

impl ChatModel for HttpBackend {
    fn complete(&self, template: TemplateId, prompt: &str) -> Result<String, ProviderError> {
        let cap = Capability::Chat;
        let model = self.model_overrides.get(&template).unwrap_or(&self.model);
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = self.send(cap, self.client.post(self.url("chat/completions")).json(&body))?;
        let value = Self::json(cap, response)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| Self::shape_error(cap, "choices[0].message.content"))
    }
}

impl Transcriber for HttpBackend {
    fn transcribe(&self, audio: &AudioRef) -> Result<String, ProviderError> {
        let cap = Capability::Transcribe;
        let file = multipart::Part::bytes(wav_bytes(&audio.samples))
            .file_name("utterance.wav")
            .mime_str("audio/wav")
            .map_err(|e| ProviderError::Transport { capability: cap, message: e.to_string() })?;
        let form = multipart::Form::new().text("model", self.model.clone()).part("file", file);
        let response = self.send(cap, self.client.post(self.url("audio/transcriptions")).multipart(form))?;
        let value = Self::json(cap, response)?;
        value["text"].as_str().map(str::to_owned).ok_or_else(|| Self::shape_error(cap, "text"))
    }
}

impl Synthesizer for HttpBackend {
    fn synthesize(&self, text: &str, voice: &str) -> Result<Vec<u8>, ProviderError> {
        let cap = Capability::Synthesize;
        let body = json!({"model": self.model, "input": text, "voice": voice, "response_format": "wav"});
        let response = self.send(cap, self.client.post(self.url("audio/speech")).json(&body))?;
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| ProviderError::Transport { capability: cap, message: e.to_string() })
    }
}

impl Embedder for HttpBackend {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let cap = Capability::Embed;
        let body = json!({"model": self.model, "input": text});
        let response = self.send(cap, self.client.post(self.url("embeddings")).json(&body))?;
        let value = Self::json(cap, response)?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| Self::shape_error(cap, "data[0].embedding"))
    }
}
