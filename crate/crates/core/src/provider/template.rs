//! Prompt templates with named slots.
//!
//! `{{slot}}` is replaced by the bound value. `{{#slot}} ... {{/slot}}` is an
//! optional section, emitted only when `slot` is bound to a non-empty value.
//! Templates are parsed once, so slot markers inside bound values are never
//! expanded again.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Every slot name a template may reference.
pub const SLOTS: [&str; 13] = [
    "qa_history",
    "original_text",
    "tone",
    "tone_description",
    "issues",
    "draft",
    "memories",
    "changed_question_id",
    "original_answer",
    "new_answer",
    "tone_categories",
    "skipped_questions",
    "memory_context",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    WriteQuestion,
    ReplyInitialQuestion,
    ReplyQuestion,
    WriteOutput,
    ReplyOutput,
    FactCheck,
    FactCorrection,
    ToneClassification,
    MemoryContext,
    MemoryFactCheck,
    DependencyAnalysis,
}

impl TemplateId {
    pub const ALL: [TemplateId; 11] = [
        TemplateId::WriteQuestion,
        TemplateId::ReplyInitialQuestion,
        TemplateId::ReplyQuestion,
        TemplateId::WriteOutput,
        TemplateId::ReplyOutput,
        TemplateId::FactCheck,
        TemplateId::FactCorrection,
        TemplateId::ToneClassification,
        TemplateId::MemoryContext,
        TemplateId::MemoryFactCheck,
        TemplateId::DependencyAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::WriteQuestion => "write_question",
            TemplateId::ReplyInitialQuestion => "reply_initial_question",
            TemplateId::ReplyQuestion => "reply_question",
            TemplateId::WriteOutput => "write_output",
            TemplateId::ReplyOutput => "reply_output",
            TemplateId::FactCheck => "fact_check",
            TemplateId::FactCorrection => "fact_correction",
            TemplateId::ToneClassification => "tone_classification",
            TemplateId::MemoryContext => "memory_context",
            TemplateId::MemoryFactCheck => "memory_fact_check",
            TemplateId::DependencyAnalysis => "dependency_analysis",
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            TemplateId::WriteQuestion => include_str!("../../prompts/write_question.txt"),
            TemplateId::ReplyInitialQuestion => include_str!("../../prompts/reply_initial_question.txt"),
            TemplateId::ReplyQuestion => include_str!("../../prompts/reply_question.txt"),
            TemplateId::WriteOutput => include_str!("../../prompts/write_output.txt"),
            TemplateId::ReplyOutput => include_str!("../../prompts/reply_output.txt"),
            TemplateId::FactCheck => include_str!("../../prompts/fact_check.txt"),
            TemplateId::FactCorrection => include_str!("../../prompts/fact_correction.txt"),
            TemplateId::ToneClassification => include_str!("../../prompts/tone_classification.txt"),
            TemplateId::MemoryContext => include_str!("../../prompts/memory_context.txt"),
            TemplateId::MemoryFactCheck => include_str!("../../prompts/memory_fact_check.txt"),
            TemplateId::DependencyAnalysis => include_str!("../../prompts/dependency_analysis.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_owned()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("{slot} unbound in template {template}")]
    Unbound { template: TemplateId, slot: String },
    #[error("template {template}: {message}")]
    Syntax { template: TemplateId, message: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("reading template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Text(String),
    Slot(&'static str),
    Section(&'static str, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    id: TemplateId,
    nodes: Vec<Node>,
}

impl Template {
    pub fn parse(id: TemplateId, source: &str) -> Result<Self, TemplateError> {
        let mut stack: Vec<(&'static str, Vec<Node>)> = Vec::new();
        let mut current: Vec<Node> = Vec::new();
        let mut rest = source;
        let syntax = |message: String| TemplateError::Syntax { template: id, message };

        while let Some(open) = rest.find("{{") {
            if open > 0 {
                current.push(Node::Text(rest[..open].to_owned()));
            }
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| syntax("unterminated slot marker".into()))?;
            let tag = after[..close].trim();
            rest = &after[close + 2..];

            let (kind, name) = match tag.chars().next() {
                Some('#') => ('#', &tag[1..]),
                Some('/') => ('/', &tag[1..]),
                _ => (' ', tag),
            };
            let slot = SLOTS
                .iter()
                .copied()
                .find(|s| *s == name)
                .ok_or_else(|| syntax(format!("unknown slot {name:?}")))?;
            match kind {
                '#' => {
                    stack.push((slot, std::mem::take(&mut current)));
                }
                '/' => {
                    let (open_slot, parent) = stack
                        .pop()
                        .ok_or_else(|| syntax(format!("section {slot} closed but never opened")))?;
                    if open_slot != slot {
                        return Err(syntax(format!("section {open_slot} closed by {slot}")));
                    }
                    let body = std::mem::replace(&mut current, parent);
                    current.push(Node::Section(slot, body));
                }
                _ => current.push(Node::Slot(slot)),
            }
        }
        if !rest.is_empty() {
            current.push(Node::Text(rest.to_owned()));
        }
        if let Some((slot, _)) = stack.pop() {
            return Err(syntax(format!("section {slot} never closed")));
        }
        Ok(Self { id, nodes: current })
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    /// Slots that must be bound no matter which optional sections apply.
    pub fn required_slots(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Node::Slot(name) = node {
                if !out.contains(name) {
                    out.push(*name);
                }
            }
        }
        out
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        let mut out = String::new();
        self.render_nodes(&self.nodes, bindings, &mut out)?;
        Ok(out)
    }

    fn render_nodes(&self, nodes: &[Node], bindings: &Bindings, out: &mut String) -> Result<(), TemplateError> {
        for node in nodes {
            match node {
                Node::Text(text) => out.push_str(text),
                Node::Slot(name) => match bindings.get(name) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(TemplateError::Unbound {
                            template: self.id,
                            slot: (*name).to_owned(),
                        })
                    }
                },
                Node::Section(name, body) => {
                    if bindings.get(name).is_some_and(|v| !v.is_empty()) {
                        self.render_nodes(body, bindings, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Slot values for one rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.set(slot, value);
        self
    }

    pub fn set(&mut self, slot: &str, value: impl Into<String>) {
        self.0.insert(slot.to_owned(), value.into());
    }

    /// Binds `slot` only when `value` is present.
    pub fn with_opt(self, slot: &str, value: Option<impl Into<String>>) -> Self {
        match value {
            Some(v) => self.with(slot, v),
            None => self,
        }
    }

    pub fn get(&self, slot: &str) -> Option<&str> {
        self.0.get(slot).map(String::as_str)
    }
}

/// The full set of templates, built in or overridden from a directory.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: HashMap<TemplateId, Template>,
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = Template::parse(id, id.builtin_source()).expect("built-in templates parse");
                (id, t)
            })
            .collect();
        Self { templates }
    }

    /// Built-in templates with any `<template_id>.txt` found in `dir`
    /// replacing the corresponding default.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut library = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.as_str()));
            if !path.exists() {
                continue;
            }
            let source = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            library.templates.insert(id, Template::parse(id, &source)?);
        }
        Ok(library)
    }

    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String, TemplateError> {
        self.get(id).render(bindings)
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}
