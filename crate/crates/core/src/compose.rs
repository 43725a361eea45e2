//! Tone classification, drafting and the bounded fact-check loop.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::diff::{word_diff, EditCounts};
use crate::memory::{MemoryContext, Purpose};
use crate::provider::{Bindings, Gateway, Parsed, Prompt, ProviderError, Schema, TemplateId};
use crate::qa::{ConversationGraph, TaskKind};
use crate::tone::ToneLabel;

pub const DEFAULT_MAX_PASSES: u32 = 10;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("conversation is not finished")]
    NotFinished,
    #[error("nothing to compose")]
    NothingToCompose,
    #[error("{stage} returned empty output")]
    EmptyOutput { stage: &'static str },
    #[error("{stage} failed (pass {pass}): {source}")]
    Provider {
        stage: &'static str,
        pass: u32,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
    #[error("invalid compose config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    Missing,
    Inconsistent,
    Inaccurate,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactIssue {
    #[serde(rename = "type")]
    pub issue_type: IssueType,
    pub detail: String,
    #[serde(default)]
    pub qa_reference: String,
}

impl FactIssue {
    fn unsupported(detail: impl Into<String>) -> Self {
        Self { issue_type: IssueType::Unsupported, detail: detail.into(), qa_reference: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactCheckReport {
    pub passed: bool,
    pub issues: Vec<FactIssue>,
}

impl FactCheckReport {
    /// Restores `passed` iff `issues` is empty. A pass flag contradicted by
    /// listed issues fails; a failure with nothing listed gets a placeholder.
    pub fn normalized(passed: bool, issues: Vec<FactIssue>) -> Self {
        match (passed, issues.is_empty()) {
            (true, true) => Self { passed: true, issues },
            (true, false) | (false, false) => Self { passed: false, issues },
            (false, true) => Self {
                passed: false,
                issues: vec![FactIssue::unsupported("fact checker failed the draft without listing issues")],
            },
        }
    }
}

/// One fact-check pass: the report on the draft whose hash is recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: u32,
    pub passed: bool,
    pub issues: Vec<FactIssue>,
    pub draft_sha256: String,
    /// Edits from the previous pass's draft to this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<EditCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalDraft {
    pub text: String,
    pub tone: ToneLabel,
    pub tone_reasoning: String,
    pub passes_used: u32,
    pub residual_issues: Vec<FactIssue>,
    pub provenance: Vec<PassRecord>,
}

impl FinalDraft {
    /// Provenance as JSONL, one pass per line.
    pub fn provenance_jsonl(&self) -> String {
        self.provenance
            .iter()
            .map(|p| serde_json::to_string(p).expect("pass record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassTiming {
    pub pass: u32,
    pub check_ms: u64,
    pub correct_ms: Option<u64>,
}

/// The draft plus everything that is not a pure function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeOutcome {
    pub draft: FinalDraft,
    pub warnings: Vec<String>,
    pub timings: Vec<PassTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposeConfig {
    pub max_passes: u32,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self { max_passes: DEFAULT_MAX_PASSES }
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Strips whitespace, one enclosing code fence and one pair of enclosing quotes.
pub fn sanitize_output(raw: &str) -> String {
    let mut text = crate::provider::reply::strip_fences(raw).trim();
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}')] {
        if text.len() >= 2 && text.starts_with(open) && text.ends_with(close) {
            let inner = &text[open.len_utf8()..text.len() - close.len_utf8()];
            if !inner.contains(open) && !inner.contains(close) || open != close {
                text = inner.trim();
                break;
            }
        }
    }
    text.to_owned()
}

pub struct Composer {
    gateway: Arc<Gateway>,
    config: ComposeConfig,
    memory: MemoryContext,
}

impl Composer {
    pub fn new(gateway: Arc<Gateway>, config: ComposeConfig) -> Self {
        Self { gateway, config, memory: MemoryContext::default() }
    }

    pub fn with_memory(mut self, memory: MemoryContext) -> Self {
        self.memory = memory;
        self
    }

    fn provider(stage: &'static str, pass: u32) -> impl FnOnce(ProviderError) -> ComposeError {
        move |source| ComposeError::Provider { stage, pass, source }
    }

    fn memory_block(&self, purpose: Purpose) -> Result<String, ComposeError> {
        Ok(self.memory.render_block(purpose, self.gateway.prompts())?)
    }

    pub fn classify_tone(
        &self,
        qa_history: &str,
        original_text: Option<&str>,
    ) -> Result<(ToneLabel, String), ComposeError> {
        let stage = "tone classification";
        let empty = match serde_json::from_str::<Vec<serde_json::Value>>(qa_history) {
            Ok(items) => items.is_empty(),
            Err(_) => qa_history.trim().is_empty(),
        };
        if empty {
            return Err(ComposeError::NothingToCompose);
        }
        let bindings = Bindings::new()
            .with("qa_history", qa_history)
            .with_opt("original_text", original_text)
            .with("tone_categories", ToneLabel::category_listing());
        let prompt = self
            .gateway
            .render(TemplateId::ToneClassification, &bindings)
            .map_err(Self::provider(stage, 0))?;
        let ask = |p: &Prompt| -> Result<(String, String), ComposeError> {
            match self.gateway.chat_structured(p, Schema::Tone).map_err(Self::provider(stage, 0))?.parsed {
                Parsed::Tone { tone, reasoning } => Ok((tone, reasoning)),
                _ => unreachable!("schema fixes the variant"),
            }
        };
        let (tone, reasoning) = ask(&prompt)?;
        if let Ok(label) = tone.parse::<ToneLabel>() {
            return Ok((label, reasoning));
        }
        let names: Vec<&str> = ToneLabel::ALL.iter().map(|t| t.name()).collect();
        let retry = Prompt {
            template: prompt.template,
            text: format!(
                "{}\n\n\"{tone}\" is not a valid tone. The tone must be exactly one of: {}.",
                prompt.text,
                names.join(", ")
            ),
        };
        let (second, reasoning) = ask(&retry)?;
        second.parse::<ToneLabel>().map(|label| (label, reasoning)).map_err(|_| ComposeError::Provider {
            stage,
            pass: 0,
            source: ProviderError::MalformedOutput { raw: second.clone(), reason: format!("unknown tone {second:?}") },
        })
    }

    /// Returns the draft and any warnings about it.
    pub fn generate_draft(
        &self,
        qa_history: &str,
        tone: ToneLabel,
        task: TaskKind,
        original_text: Option<&str>,
    ) -> Result<(String, Vec<String>), ComposeError> {
        let stage = "draft generation";
        let template = match task {
            TaskKind::Write => TemplateId::WriteOutput,
            TaskKind::Reply => TemplateId::ReplyOutput,
        };
        let bindings = Bindings::new()
            .with("qa_history", qa_history)
            .with("tone", tone.name())
            .with("tone_description", tone.description())
            .with_opt("original_text", original_text)
            .with("memory_context", self.memory_block(Purpose::Prompting)?);
        let prompt = self.gateway.render(template, &bindings).map_err(Self::provider(stage, 0))?;
        let raw = self.gateway.chat_raw(prompt.template, &prompt.text).map_err(Self::provider(stage, 0))?;
        let text = sanitize_output(&raw);
        if text.is_empty() {
            return Err(ComposeError::EmptyOutput { stage });
        }
        let mut warnings = Vec::new();
        if task == TaskKind::Reply {
            if let Some(name) = self.memory.user_name() {
                if text.to_lowercase().starts_with(&name.to_lowercase()) {
                    warnings.push(format!("reply draft begins with the user's own name {name:?}"));
                }
            }
        }
        Ok((text, warnings))
    }

    pub fn fact_check(&self, qa_history: &str, draft: &str, pass: u32) -> Result<FactCheckReport, ComposeError> {
        let stage = "fact check";
        if draft.trim().is_empty() {
            return Err(ComposeError::EmptyOutput { stage: "draft" });
        }
        let bindings = Bindings::new()
            .with("qa_history", qa_history)
            .with("draft", draft)
            .with("memory_context", self.memory_block(Purpose::FactChecking)?);
        let prompt = self
            .gateway
            .render(TemplateId::FactCheck, &bindings)
            .map_err(Self::provider(stage, pass))?;
        match self.gateway.chat_structured(&prompt, Schema::FactCheck) {
            Ok(reply) => match reply.parsed {
                Parsed::FactCheck { passed, issues } => Ok(FactCheckReport::normalized(passed, issues)),
                _ => unreachable!("schema fixes the variant"),
            },
            Err(ProviderError::MalformedOutput { raw, .. }) => Ok(FactCheckReport {
                passed: false,
                issues: vec![FactIssue::unsupported(format!("fact checker returned malformed output: {raw}"))],
            }),
            Err(e) => Err(Self::provider(stage, pass)(e)),
        }
    }

    pub fn correct_draft(
        &self,
        qa_history: &str,
        draft: &str,
        issues: &[FactIssue],
        tone: ToneLabel,
        pass: u32,
    ) -> Result<String, ComposeError> {
        let stage = "correction";
        let bindings = Bindings::new()
            .with("qa_history", qa_history)
            .with("draft", draft)
            .with("issues", serde_json::to_string_pretty(issues).expect("issues serialize"))
            .with("tone", tone.name())
            .with("tone_description", tone.description());
        let prompt = self
            .gateway
            .render(TemplateId::FactCorrection, &bindings)
            .map_err(Self::provider(stage, pass))?;
        let raw = self.gateway.chat_raw(prompt.template, &prompt.text).map_err(Self::provider(stage, pass))?;
        let text = sanitize_output(&raw);
        if text.is_empty() {
            return Err(ComposeError::EmptyOutput { stage });
        }
        Ok(text)
    }

    pub fn compose(&self, graph: &ConversationGraph) -> Result<ComposeOutcome, ComposeError> {
        if self.config.max_passes == 0 {
            return Err(ComposeError::Config("max_passes must be at least 1"));
        }
        if !graph.finished {
            return Err(ComposeError::NotFinished);
        }
        if graph.answered_count() == 0 {
            return Err(ComposeError::NothingToCompose);
        }
        let history = graph.qa_history();
        let original = graph.original_text.as_deref();
        let (tone, tone_reasoning) = self.classify_tone(&history, original)?;
        let (mut text, mut warnings) = self.generate_draft(&history, tone, graph.task_kind, original)?;

        let mut provenance: Vec<PassRecord> = Vec::new();
        let mut timings = Vec::new();
        let mut previous: Option<String> = None;
        let mut residual = Vec::new();
        for pass in 1..=self.config.max_passes {
            let started = Instant::now();
            let report = self.fact_check(&history, &text, pass)?;
            let check_ms = started.elapsed().as_millis() as u64;
            provenance.push(PassRecord {
                pass,
                passed: report.passed,
                issues: report.issues.clone(),
                draft_sha256: sha256_hex(&text),
                diff: previous.as_deref().map(|p| word_diff(p, &text)),
            });
            if report.passed {
                residual.clear();
                timings.push(PassTiming { pass, check_ms, correct_ms: None });
                break;
            }
            residual = report.issues;
            if pass == self.config.max_passes {
                warnings.push(format!("fact-check loop stopped at {pass} passes with unresolved issues"));
                timings.push(PassTiming { pass, check_ms, correct_ms: None });
                break;
            }
            let started = Instant::now();
            let corrected = self.correct_draft(&history, &text, &residual, tone, pass)?;
            timings.push(PassTiming { pass, check_ms, correct_ms: Some(started.elapsed().as_millis() as u64) });
            previous = Some(std::mem::replace(&mut text, corrected));
        }

        Ok(ComposeOutcome {
            draft: FinalDraft {
                text,
                tone,
                tone_reasoning,
                passes_used: provenance.len() as u32,
                residual_issues: residual,
                provenance,
            },
            warnings,
            timings,
        })
    }
}
