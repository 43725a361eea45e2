//! The adaptive question loop over a linear conversation graph.
//!
//! Each operation works on a copy of the graph and commits only when every
//! provider call succeeded, so a failed call never leaves a half-applied
//! mutation behind.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::provider::{
    Bindings, DependencyStatus, Gateway, Parsed, Prompt, ProviderError, Schema, TemplateId,
};
use crate::text::{normalize, normalized_key};

pub const DEFAULT_MAX_QUESTIONS: usize = 25;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("no active question")]
    NoActiveQuestion,
    #[error("boundary")]
    Boundary,
    #[error("unknown question id {0}")]
    UnknownTurn(u64),
    #[error("question {0} has no answer to modify")]
    NotModifiable(u64),
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("nothing to compose")]
    NothingToCompose,
    #[error("reply task requires the original text")]
    MissingOriginalText,
    #[error("empty session set")]
    EmptySet,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Write,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Pending,
    Answered,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTurn {
    pub id: u64,
    pub question: String,
    pub answer: Option<String>,
    pub status: TurnStatus,
    /// The model's follow-up flag returned after this turn was resolved.
    pub followup_needed_after: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidationPolicy {
    #[default]
    TruncateAll,
    DependencyAware,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationGraph {
    pub turns: Vec<QuestionTurn>,
    pub cursor: usize,
    pub task_kind: TaskKind,
    pub original_text: Option<String>,
    pub finished: bool,
    pub next_id: u64,
    /// Questions the user skipped, in skip order. Never asked again.
    pub skipped_questions: Vec<String>,
    pub warnings: Vec<String>,
}

impl ConversationGraph {
    fn empty(task_kind: TaskKind, original_text: Option<String>) -> Self {
        Self {
            turns: Vec::new(),
            cursor: 0,
            task_kind,
            original_text,
            finished: false,
            next_id: 1,
            skipped_questions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn active(&self) -> Option<&QuestionTurn> {
        self.turns.get(self.cursor)
    }

    pub fn pending(&self) -> Option<&QuestionTurn> {
        self.turns.last().filter(|t| t.status == TurnStatus::Pending)
    }

    pub fn turn(&self, id: u64) -> Option<&QuestionTurn> {
        self.turns.iter().find(|t| t.id == id)
    }

    pub fn answered_count(&self) -> usize {
        self.turns.iter().filter(|t| t.status == TurnStatus::Answered).count()
    }

    pub fn is_skipped_question(&self, question: &str) -> bool {
        let key = normalized_key(question);
        self.skipped_questions.iter().any(|q| normalized_key(q) == key)
    }

    /// Resolved turns as the JSON array given to every prompt.
    pub fn qa_history(&self) -> String {
        qa_history_json(&self.turns)
    }

    /// Checks the structural invariants, describing the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.turns.is_empty() {
            return Err("graph has no turns".into());
        }
        if self.cursor >= self.turns.len() {
            return Err(format!("cursor {} out of range {}", self.cursor, self.turns.len()));
        }
        for pair in self.turns.windows(2) {
            if pair[0].id >= pair[1].id {
                return Err(format!("ids not increasing: {} then {}", pair[0].id, pair[1].id));
            }
        }
        if self.turns.iter().any(|t| t.id >= self.next_id) {
            return Err("turn id at or above next_id".into());
        }
        let pending: Vec<_> = self.turns.iter().enumerate().filter(|(_, t)| t.status == TurnStatus::Pending).collect();
        if pending.len() > 1 || pending.first().is_some_and(|(i, _)| *i != self.turns.len() - 1) {
            return Err("pending turn is not unique and last".into());
        }
        if self.finished && !pending.is_empty() {
            return Err("finished graph has a pending turn".into());
        }
        for t in &self.turns {
            match t.status {
                TurnStatus::Answered if t.answer.as_deref().is_none_or(|a| a.trim().is_empty()) => {
                    return Err(format!("answered turn {} has no answer", t.id))
                }
                TurnStatus::Skipped | TurnStatus::Pending if t.answer.is_some() => {
                    return Err(format!("unanswered turn {} carries an answer", t.id))
                }
                _ => {}
            }
        }
        if self.task_kind == TaskKind::Reply && self.original_text.as_deref().is_none_or(|t| t.trim().is_empty()) {
            return Err("reply graph without original text".into());
        }
        Ok(())
    }
}

/// Pretty JSON array of `{id, question, answer, status}` for resolved turns.
pub fn qa_history_json(turns: &[QuestionTurn]) -> String {
    let items: Vec<_> = turns
        .iter()
        .filter(|t| t.status != TurnStatus::Pending)
        .map(|t| {
            json!({
                "id": t.id,
                "question": t.question,
                "answer": t.answer,
                "status": t.status,
            })
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("history serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphEventKind {
    QuestionAdded,
    AnswerSet,
    QuestionSkipped,
    TurnsRemoved,
    CursorMoved,
    Finished,
    Reopened,
    Warning,
}

/// One line of the UI event stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEvent {
    pub event: GraphEventKind,
    pub ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl GraphEvent {
    fn new(event: GraphEventKind, ids: Vec<u64>) -> Self {
        Self { event, ids, detail: None }
    }
}

/// What follows an answer or skip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advance {
    Question(QuestionTurn),
    /// Enough context has been gathered; compose the draft.
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "direction", content = "id")]
pub enum Navigation {
    Next,
    Previous,
    Target(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidationResult {
    pub removed_ids: Vec<u64>,
    /// Surviving turns after the modified one.
    pub kept_ids: Vec<u64>,
    pub new_pending_question: Option<QuestionTurn>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub max_questions: usize,
    pub policy: InvalidationPolicy,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self { max_questions: DEFAULT_MAX_QUESTIONS, policy: InvalidationPolicy::TruncateAll }
    }
}

pub struct QaEngine {
    gateway: Arc<Gateway>,
    config: QaConfig,
    memory_block: String,
    events: Vec<GraphEvent>,
}

struct Work {
    graph: ConversationGraph,
    events: Vec<GraphEvent>,
}

impl Work {
    fn emit(&mut self, event: GraphEventKind, ids: Vec<u64>) {
        self.events.push(GraphEvent::new(event, ids));
    }

    fn warn(&mut self, message: String) {
        tracing::warn!(%message);
        self.graph.warnings.push(message.clone());
        self.events.push(GraphEvent { event: GraphEventKind::Warning, ids: Vec::new(), detail: Some(message) });
    }
}

impl QaEngine {
    pub fn new(gateway: Arc<Gateway>, config: QaConfig) -> Self {
        Self { gateway, config, memory_block: String::new(), events: Vec::new() }
    }

    /// Rendered user-context block included in question prompts.
    pub fn with_memory_block(mut self, block: String) -> Self {
        self.memory_block = block;
        self
    }

    pub fn config(&self) -> &QaConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// Events produced by committed operations since the last drain.
    pub fn drain_events(&mut self) -> Vec<GraphEvent> {
        std::mem::take(&mut self.events)
    }

    fn commit(&mut self, graph: &mut ConversationGraph, work: Work) {
        *graph = work.graph;
        self.events.extend(work.events);
    }

    pub fn start_session(
        &mut self,
        task_kind: TaskKind,
        original_text: Option<&str>,
    ) -> Result<ConversationGraph, QaError> {
        let original_text = original_text.map(str::to_owned).filter(|t| !t.trim().is_empty());
        if task_kind == TaskKind::Reply && original_text.is_none() {
            return Err(QaError::MissingOriginalText);
        }
        let mut work = Work { graph: ConversationGraph::empty(task_kind, original_text), events: Vec::new() };
        let advance = self.generate_next(&mut work)?;
        if advance == Advance::Generate {
            // A first prompt must produce a question; treat the refusal as malformed.
            return Err(ProviderError::MalformedOutput {
                raw: String::new(),
                reason: "first question generation returned followup_needed=false".into(),
            }
            .into());
        }
        let mut graph = work.graph.clone();
        self.commit(&mut graph, work);
        Ok(graph)
    }

    pub fn submit_answer(&mut self, graph: &mut ConversationGraph, answer: &str) -> Result<Advance, QaError> {
        let answer = answer.trim();
        if answer.is_empty() {
            return Err(QaError::EmptyAnswer);
        }
        let idx = Self::active_pending(graph)?;
        let mut work = Work { graph: graph.clone(), events: Vec::new() };
        let turn = &mut work.graph.turns[idx];
        turn.answer = Some(answer.to_owned());
        turn.status = TurnStatus::Answered;
        let id = turn.id;
        work.emit(GraphEventKind::AnswerSet, vec![id]);
        let advance = self.generate_next(&mut work)?;
        self.commit(graph, work);
        Ok(advance)
    }

    pub fn skip_question(&mut self, graph: &mut ConversationGraph) -> Result<Advance, QaError> {
        let idx = Self::active_pending(graph)?;
        let mut work = Work { graph: graph.clone(), events: Vec::new() };
        let turn = &mut work.graph.turns[idx];
        turn.status = TurnStatus::Skipped;
        let (id, question) = (turn.id, turn.question.clone());
        if !work.graph.is_skipped_question(&question) {
            work.graph.skipped_questions.push(question);
        }
        work.emit(GraphEventKind::QuestionSkipped, vec![id]);
        let advance = self.generate_next(&mut work)?;
        self.commit(graph, work);
        Ok(advance)
    }

    pub fn navigate(&mut self, graph: &mut ConversationGraph, nav: Navigation) -> Result<usize, QaError> {
        let target = match nav {
            Navigation::Next if graph.cursor + 1 < graph.turns.len() => graph.cursor + 1,
            Navigation::Previous if graph.cursor > 0 => graph.cursor - 1,
            Navigation::Next | Navigation::Previous => return Err(QaError::Boundary),
            Navigation::Target(id) => graph
                .turns
                .iter()
                .position(|t| t.id == id)
                .ok_or(QaError::UnknownTurn(id))?,
        };
        graph.cursor = target;
        self.events.push(GraphEvent::new(GraphEventKind::CursorMoved, vec![graph.turns[target].id]));
        Ok(target)
    }

    pub fn modify_answer(
        &mut self,
        graph: &mut ConversationGraph,
        question_id: u64,
        new_answer: &str,
        policy: InvalidationPolicy,
    ) -> Result<InvalidationResult, QaError> {
        let new_answer = new_answer.trim();
        if new_answer.is_empty() {
            return Err(QaError::EmptyAnswer);
        }
        let idx = graph
            .turns
            .iter()
            .position(|t| t.id == question_id)
            .ok_or(QaError::UnknownTurn(question_id))?;
        if graph.turns[idx].status == TurnStatus::Pending {
            return Err(QaError::NotModifiable(question_id));
        }

        let mut work = Work { graph: graph.clone(), events: Vec::new() };
        let original_answer = work.graph.turns[idx].answer.clone();
        {
            let turn = &mut work.graph.turns[idx];
            turn.answer = Some(new_answer.to_owned());
            turn.status = TurnStatus::Answered;
        }
        work.emit(GraphEventKind::AnswerSet, vec![question_id]);

        let pending_id = work.graph.pending().map(|t| t.id);
        let later: Vec<u64> = work
            .graph
            .turns
            .iter()
            .filter(|t| t.id > question_id && t.status != TurnStatus::Pending)
            .map(|t| t.id)
            .collect();

        let mut warning = None;
        let mut removed: Vec<u64> = match policy {
            InvalidationPolicy::TruncateAll => later.clone(),
            InvalidationPolicy::DependencyAware if later.is_empty() => Vec::new(),
            InvalidationPolicy::DependencyAware => {
                match self.dependency_verdicts(&work.graph, question_id, original_answer.as_deref(), new_answer) {
                    Ok(unaffected) => later.iter().copied().filter(|id| !unaffected.contains(id)).collect(),
                    Err(ProviderError::MalformedOutput { reason, .. }) => {
                        let message = format!("dependency analysis unusable ({reason}); truncated all later turns");
                        work.warn(message.clone());
                        warning = Some(message);
                        later.clone()
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        removed.extend(pending_id);
        removed.sort_unstable();

        work.graph.turns.retain(|t| !removed.contains(&t.id));
        if !removed.is_empty() {
            work.emit(GraphEventKind::TurnsRemoved, removed.clone());
        }
        let kept_ids: Vec<u64> = work.graph.turns.iter().filter(|t| t.id > question_id).map(|t| t.id).collect();
        if work.graph.finished {
            work.graph.finished = false;
            work.emit(GraphEventKind::Reopened, vec![question_id]);
        }
        work.graph.cursor = work.graph.turns.len() - 1;

        let advance = self.generate_next(&mut work)?;
        self.commit(graph, work);
        Ok(InvalidationResult {
            removed_ids: removed,
            kept_ids,
            new_pending_question: match advance {
                Advance::Question(q) => Some(q),
                Advance::Generate => None,
            },
            warning,
        })
    }

    /// Ends the question loop. A pending turn is kept and marked skipped.
    pub fn finish(&mut self, graph: &mut ConversationGraph) -> Result<(), QaError> {
        if graph.answered_count() == 0 {
            return Err(QaError::NothingToCompose);
        }
        if graph.finished {
            return Ok(());
        }
        let mut ids = Vec::new();
        if let Some(last) = graph.turns.last_mut().filter(|t| t.status == TurnStatus::Pending) {
            last.status = TurnStatus::Skipped;
            ids.push(last.id);
        }
        graph.finished = true;
        self.events.push(GraphEvent::new(GraphEventKind::Finished, ids));
        Ok(())
    }

    fn active_pending(graph: &ConversationGraph) -> Result<usize, QaError> {
        match graph.active() {
            Some(t) if t.status == TurnStatus::Pending && !graph.finished => Ok(graph.cursor),
            _ => Err(QaError::NoActiveQuestion),
        }
    }

    fn question_prompt(&self, graph: &ConversationGraph) -> Result<Prompt, ProviderError> {
        let has_history = graph.turns.iter().any(|t| t.status != TurnStatus::Pending);
        let template = match graph.task_kind {
            TaskKind::Write => TemplateId::WriteQuestion,
            TaskKind::Reply if has_history => TemplateId::ReplyQuestion,
            TaskKind::Reply => TemplateId::ReplyInitialQuestion,
        };
        let skipped = graph
            .skipped_questions
            .iter()
            .map(|q| format!("- {q}"))
            .collect::<Vec<_>>()
            .join("\n");
        let bindings = Bindings::new()
            .with("qa_history", graph.qa_history())
            .with_opt("original_text", graph.original_text.clone())
            .with("skipped_questions", skipped)
            .with("memory_context", self.memory_block.clone());
        self.gateway.render(template, &bindings)
    }

    fn ask(&self, prompt: &Prompt) -> Result<(String, bool), ProviderError> {
        match self.gateway.chat_structured(prompt, Schema::NextQuestion)?.parsed {
            Parsed::NextQuestion { question, followup_needed } => Ok((question, followup_needed)),
            _ => unreachable!("schema fixes the variant"),
        }
    }

    fn generate_next(&self, work: &mut Work) -> Result<Advance, QaError> {
        if work.graph.turns.len() >= self.config.max_questions {
            work.warn(format!("question cap of {} reached", self.config.max_questions));
            return Ok(Self::finish_from_model(work, None));
        }
        let prompt = self.question_prompt(&work.graph)?;
        let (mut question, mut followup) = self.ask(&prompt)?;
        if followup && work.graph.is_skipped_question(&question) {
            let retry = Prompt {
                template: prompt.template,
                text: format!(
                    "{}\n\nThe user already skipped the question \"{question}\". Ask a different question, or set followup_needed to false.",
                    prompt.text
                ),
            };
            (question, followup) = self.ask(&retry)?;
            if followup && work.graph.is_skipped_question(&question) {
                work.warn(format!("model repeated skipped question {question:?}; ending questions"));
                return Ok(Self::finish_from_model(work, Some(false)));
            }
        }
        if let Some(last) = work.graph.turns.iter_mut().rev().find(|t| t.status != TurnStatus::Pending) {
            last.followup_needed_after = Some(followup);
        }
        if !followup {
            return Ok(Self::finish_from_model(work, None));
        }
        let id = work.graph.next_id;
        work.graph.next_id += 1;
        let turn = QuestionTurn {
            id,
            question,
            answer: None,
            status: TurnStatus::Pending,
            followup_needed_after: None,
        };
        work.graph.turns.push(turn.clone());
        work.graph.cursor = work.graph.turns.len() - 1;
        work.emit(GraphEventKind::QuestionAdded, vec![id]);
        Ok(Advance::Question(turn))
    }

    fn finish_from_model(work: &mut Work, flag: Option<bool>) -> Advance {
        if let Some(flag) = flag {
            if let Some(last) = work.graph.turns.iter_mut().rev().find(|t| t.status != TurnStatus::Pending) {
                last.followup_needed_after = Some(flag);
            }
        }
        work.graph.finished = true;
        if !work.graph.turns.is_empty() {
            work.graph.cursor = work.graph.turns.len() - 1;
        }
        work.emit(GraphEventKind::Finished, Vec::new());
        Advance::Generate
    }

    /// Ids judged unaffected by the change; anything else is treated as affected.
    fn dependency_verdicts(
        &self,
        graph: &ConversationGraph,
        question_id: u64,
        original_answer: Option<&str>,
        new_answer: &str,
    ) -> Result<Vec<u64>, ProviderError> {
        let bindings = Bindings::new()
            .with("changed_question_id", question_id.to_string())
            .with("original_answer", original_answer.unwrap_or("(skipped)"))
            .with("new_answer", new_answer)
            .with("qa_history", graph.qa_history());
        let prompt = self.gateway.render(TemplateId::DependencyAnalysis, &bindings)?;
        match self.gateway.chat_structured(&prompt, Schema::Dependency)?.parsed {
            Parsed::Dependency { affected_questions, .. } => Ok(affected_questions
                .into_iter()
                .filter(|v| v.status == DependencyStatus::Unaffected && v.question_id > question_id)
                .map(|v| v.question_id)
                .collect()),
            _ => unreachable!("schema fixes the variant"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionStats {
    pub sessions: usize,
    pub mean_received: f64,
    pub mean_answered: f64,
    pub mean_skipped: f64,
    /// Answered over received, pooled across sessions.
    pub answer_rate: f64,
    pub mean_question_words: f64,
    pub mean_answer_words: f64,
}

pub fn question_stats(graphs: &[ConversationGraph]) -> Result<QuestionStats, QaError> {
    if graphs.is_empty() {
        return Err(QaError::EmptySet);
    }
    let n = graphs.len() as f64;
    let turns = || graphs.iter().flat_map(|g| g.turns.iter());
    let received = turns().count();
    let answered: Vec<&QuestionTurn> = turns().filter(|t| t.status == TurnStatus::Answered).collect();
    let skipped = turns().filter(|t| t.status == TurnStatus::Skipped).count();
    let question_words: usize = turns().map(|t| normalize(&t.question).len()).sum();
    let answer_words: usize = answered.iter().map(|t| normalize(t.answer.as_deref().unwrap_or("")).len()).sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(QuestionStats {
        sessions: graphs.len(),
        mean_received: received as f64 / n,
        mean_answered: answered.len() as f64 / n,
        mean_skipped: skipped as f64 / n,
        answer_rate: ratio(answered.len(), received),
        mean_question_words: ratio(question_words, received),
        mean_answer_words: ratio(answer_words, answered.len()),
    })
}
