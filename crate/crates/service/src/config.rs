//! Service configuration document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stepflow_core::provider::ProviderConfig;
use stepflow_core::qa::InvalidationPolicy;
use stepflow_core::segment::SegmenterConfig;
use thiserror::Error;

use crate::tts::DEFAULT_BUDGET_BYTES;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub similarity_threshold: f64,
    pub max_fact_check_passes: u32,
    pub thinking_window_ms: u64,
    pub interruption_window_ms: u64,
    pub max_questions: usize,
    pub invalidation_policy: InvalidationPolicy,
    pub memory_enabled: bool,
    pub memory_path: Option<PathBuf>,
    /// Registry document with user macros; the builtin table otherwise.
    pub command_registry_path: Option<PathBuf>,
    pub tts_cache_bytes: usize,
    pub speak_questions: bool,
    /// VAD settings. `thinking_window_ms` above takes precedence over the
    /// value in here.
    pub segmenter: SegmenterConfig,
    pub provider: ProviderConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("stepflow-data"),
            similarity_threshold: 0.85,
            max_fact_check_passes: 10,
            thinking_window_ms: 1500,
            interruption_window_ms: 6000,
            max_questions: 25,
            invalidation_policy: InvalidationPolicy::TruncateAll,
            memory_enabled: false,
            memory_path: None,
            command_registry_path: None,
            tts_cache_bytes: DEFAULT_BUDGET_BYTES,
            speak_questions: true,
            segmenter: SegmenterConfig::default(),
            provider: ProviderConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut config: Self = serde_json::from_str(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    /// Makes relative file paths relative to `base` (the config's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [
            &mut self.memory_path,
            &mut self.command_registry_path,
            &mut self.provider.mock_script_path,
            &mut self.provider.prompt_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return bad("similarity_threshold must be in (0, 1]");
        }
        if self.max_fact_check_passes == 0 {
            return bad("max_fact_check_passes must be at least 1");
        }
        if self.max_questions == 0 {
            return bad("max_questions must be at least 1");
        }
        self.segmenter_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn segmenter_config(&self) -> SegmenterConfig {
        SegmenterConfig { thinking_window_ms: self.thinking_window_ms, ..self.segmenter.clone() }
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            similarity_threshold: self.similarity_threshold,
            max_fact_check_passes: self.max_fact_check_passes,
            thinking_window_ms: self.thinking_window_ms,
            interruption_window_ms: self.interruption_window_ms,
            max_questions: self.max_questions,
            invalidation_policy: self.invalidation_policy,
            memory_enabled: self.memory_enabled,
            speak_questions: self.speak_questions,
            voice: self.provider.tts_voice.clone(),
        }
    }
}

/// The settings a session was created with, stored alongside it so a
/// resumed session behaves as it did before.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub similarity_threshold: f64,
    pub max_fact_check_passes: u32,
    pub thinking_window_ms: u64,
    pub interruption_window_ms: u64,
    pub max_questions: usize,
    pub invalidation_policy: InvalidationPolicy,
    pub memory_enabled: bool,
    pub speak_questions: bool,
    pub voice: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        ServiceConfig::default().session_config()
    }
}
