//! Optional per-user facts injected into question, draft and fact-check prompts.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{Bindings, PromptLibrary, TemplateError, TemplateId};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory key is empty")]
    EmptyKey,
    #[error("memory value for {0:?} is empty")]
    EmptyValue(String),
    #[error("memory file {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactSource {
    UserDeclared,
    SessionLearned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryFact {
    pub key: String,
    pub value: String,
    pub source: FactSource,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Prompting,
    FactChecking,
}

/// The on-disk document: `{"enabled": bool, "facts": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryContext {
    pub enabled: bool,
    #[serde(default)]
    pub facts: Vec<MemoryFact>,
}

impl MemoryContext {
    pub fn enabled() -> Self {
        Self { enabled: true, facts: Vec::new() }
    }

    pub fn put_fact(&mut self, key: &str, value: &str, source: FactSource) -> Result<(), MemoryError> {
        self.put_fact_at(key, value, source, Utc::now())
    }

    /// Upserts a fact; a newer value replaces the old one in place.
    pub fn put_fact_at(
        &mut self,
        key: &str,
        value: &str,
        source: FactSource,
        at: DateTime<Utc>,
    ) -> Result<(), MemoryError> {
        let key = key.trim();
        if key.is_empty() {
            return Err(MemoryError::EmptyKey);
        }
        if value.trim().is_empty() {
            return Err(MemoryError::EmptyValue(key.to_owned()));
        }
        let fact = MemoryFact { key: key.to_owned(), value: value.to_owned(), source, created_at: at };
        match self.facts.iter_mut().find(|f| f.key == key) {
            Some(existing) => *existing = fact,
            None => self.facts.push(fact),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.facts.iter().find(|f| f.key == key).map(|f| f.value.as_str())
    }

    pub fn remove(&mut self, key: &str) -> bool {
        let before = self.facts.len();
        self.facts.retain(|f| f.key != key);
        before != self.facts.len()
    }

    /// True when rendering would produce a non-empty block.
    pub fn is_active(&self) -> bool {
        self.enabled && !self.facts.is_empty()
    }

    /// Facts as a JSON object of key to value, keys sorted.
    pub fn facts_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .facts
            .iter()
            .map(|f| (f.key.clone(), serde_json::Value::String(f.value.clone())))
            .collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    /// The user-context block for `purpose`, or `""` when memory is off or empty.
    pub fn render_block(&self, purpose: Purpose, prompts: &PromptLibrary) -> Result<String, MemoryError> {
        if !self.is_active() {
            return Ok(String::new());
        }
        let template = match purpose {
            Purpose::Prompting => TemplateId::MemoryContext,
            Purpose::FactChecking => TemplateId::MemoryFactCheck,
        };
        Ok(prompts.render(template, &Bindings::new().with("memories", self.facts_json()))?)
    }

    /// The user's own name, if memory knows it.
    pub fn user_name(&self) -> Option<&str> {
        if !self.enabled {
            return None;
        }
        ["full_name", "name", "first_name"].into_iter().find_map(|k| self.get(k))
    }
}

/// File-backed memory for one user. Writers are serialized; readers take
/// snapshots.
#[derive(Debug)]
pub struct MemoryStore {
    path: PathBuf,
    inner: RwLock<MemoryContext>,
}

impl MemoryStore {
    /// Opens the store at `path`; a missing file yields a disabled, empty store.
    pub fn open(path: &Path) -> Result<Self, MemoryError> {
        let io = |e: &dyn std::fmt::Display| MemoryError::Io { path: path.display().to_string(), message: e.to_string() };
        let context = if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| io(&e))?;
            serde_json::from_str(&text).map_err(|e| io(&e))?
        } else {
            MemoryContext::default()
        };
        Ok(Self { path: path.to_owned(), inner: RwLock::new(context) })
    }

    pub fn snapshot(&self) -> MemoryContext {
        self.inner.read().clone()
    }

    pub fn set_enabled(&self, enabled: bool) -> Result<(), MemoryError> {
        let mut guard = self.inner.write();
        guard.enabled = enabled;
        self.persist(&guard)
    }

    pub fn put_fact(&self, key: &str, value: &str, source: FactSource) -> Result<(), MemoryError> {
        let mut guard = self.inner.write();
        guard.put_fact(key, value, source)?;
        self.persist(&guard)
    }

    fn persist(&self, context: &MemoryContext) -> Result<(), MemoryError> {
        let io = |e: std::io::Error| MemoryError::Io { path: self.path.display().to_string(), message: e.to_string() };
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let text = serde_json::to_string_pretty(context).expect("memory serializes");
        let tmp = self.path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, &self.path).map_err(io)
    }
}
