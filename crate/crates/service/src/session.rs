//! Session state and the routing of user input.
//!
//! [`Session`] is the persisted document. [`LiveSession`] wraps it with the
//! gateway, question engine, segmenter and playback state needed to act on
//! transcripts, audio and editor saves. Every mutating call persists the
//! document when a store is attached.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use stepflow_core::command::{CommandId, CommandMatch, CommandRegistry};
use stepflow_core::compose::{ComposeConfig, ComposeError, Composer, FinalDraft};
use stepflow_core::memory::{MemoryContext, Purpose};
use stepflow_core::provider::mock::wav_duration_ms;
use stepflow_core::provider::{Gateway, ProviderError};
use stepflow_core::qa::{
    Advance, ConversationGraph, GraphEventKind, Navigation, QaConfig, QaEngine, QaError, TaskKind, TurnStatus,
};
use stepflow_core::segment::{SegmentError, Segmenter, SegmenterConfig, UtteranceKind};
use tokio::sync::broadcast;
use uuid::Uuid;

use crate::clock::Clock;
use crate::config::SessionConfig;
use crate::events::{PlaybackAction, ServerEvent};
use crate::ledger::{IllegalTransition, Phase, PhaseLedger, TimerSnapshot};
use crate::store::{SessionStore, StoreError};
use crate::tts::{Playback, TtsCache};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Phase(#[from] IllegalTransition),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Invalid(String),
}

/// The persisted session document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: Uuid,
    pub created_at_ms: u64,
    pub graph: ConversationGraph,
    pub draft: Option<FinalDraft>,
    /// Drafts discarded because the conversation was reopened.
    #[serde(default)]
    pub superseded_drafts: Vec<FinalDraft>,
    /// Latest editor contents; `None` until the user saves once.
    pub editor_text: Option<String>,
    pub ledger: PhaseLedger,
    pub config: SessionConfig,
    pub input_enabled: bool,
    /// The next plain utterance replaces this turn's answer.
    pub modify_target: Option<u64>,
    pub last_spoken: Option<String>,
    pub warnings: Vec<String>,
}

impl Session {
    pub fn new(id: Uuid, graph: ConversationGraph, config: SessionConfig, now_ms: u64) -> Self {
        Self {
            id,
            created_at_ms: now_ms,
            graph,
            draft: None,
            superseded_drafts: Vec::new(),
            editor_text: None,
            ledger: PhaseLedger::start(now_ms),
            config,
            input_enabled: true,
            modify_target: None,
            last_spoken: None,
            warnings: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.ledger.phase
    }

    pub fn task_kind(&self) -> TaskKind {
        self.graph.task_kind
    }
}

/// What an input did, returned to the caller alongside the events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Answered,
    Skipped,
    Navigated { cursor: usize },
    ModifyArmed { turn_id: u64 },
    Modified { removed_ids: Vec<u64> },
    Paused,
    Resumed,
    /// Input is disabled, or the phase has no use for plain speech.
    Ignored,
    EditorOpened,
    Replayed,
    DraftReady,
    ReturnedToQuestions,
    StoppedSpeaking,
    EditorSaved,
    Rejected { reason: String },
}

impl Effect {
    fn rejected(reason: impl Into<String>) -> Self {
        Self::Rejected { reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptOutcome {
    pub command: Option<CommandMatch>,
    #[serde(flatten)]
    pub effect: Effect,
}

/// Services a live session shares with the rest of the server.
#[derive(Clone)]
pub struct SessionDeps {
    pub gateway: Arc<Gateway>,
    pub registry: Arc<CommandRegistry>,
    pub tts: Arc<TtsCache>,
    pub clock: Arc<dyn Clock>,
    pub store: Option<SessionStore>,
    pub memory: MemoryContext,
    pub segmenter: SegmenterConfig,
}

pub struct LiveSession {
    pub state: Session,
    deps: SessionDeps,
    engine: QaEngine,
    segmenter: Segmenter,
    stream_ms: u64,
    pcm_carry: Vec<i16>,
    odd_byte: Option<u8>,
    playback: Option<Playback>,
    outbox: Vec<ServerEvent>,
    tx: broadcast::Sender<ServerEvent>,
}

impl std::fmt::Debug for LiveSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveSession").field("id", &self.state.id).field("phase", &self.state.phase()).finish()
    }
}

fn registry_for(deps: &SessionDeps, threshold: f64) -> Result<Arc<CommandRegistry>, SessionError> {
    if (deps.registry.threshold() - threshold).abs() < f64::EPSILON {
        return Ok(deps.registry.clone());
    }
    deps.registry
        .with_threshold(threshold)
        .map(Arc::new)
        .map_err(|e| SessionError::Invalid(e.to_string()))
}

impl LiveSession {
    fn build(state: Session, mut deps: SessionDeps) -> Result<Self, SessionError> {
        deps.registry = registry_for(&deps, state.config.similarity_threshold)?;
        let memory_block = if state.config.memory_enabled {
            deps.memory
                .render_block(Purpose::Prompting, deps.gateway.prompts())
                .map_err(|e| SessionError::Invalid(e.to_string()))?
        } else {
            String::new()
        };
        let qa = QaConfig { max_questions: state.config.max_questions, policy: state.config.invalidation_policy };
        let engine = QaEngine::new(deps.gateway.clone(), qa).with_memory_block(memory_block);
        let seg_config = SegmenterConfig { thinking_window_ms: state.config.thinking_window_ms, ..deps.segmenter.clone() };
        let segmenter = Segmenter::new(seg_config)?;
        let (tx, _) = broadcast::channel(256);
        Ok(Self {
            state,
            deps,
            engine,
            segmenter,
            stream_ms: 0,
            pcm_carry: Vec::new(),
            odd_byte: None,
            playback: None,
            outbox: Vec::new(),
            tx,
        })
    }

    /// Starts a new session: the first question is generated before the
    /// session exists, so a provider failure creates nothing.
    pub fn create(
        id: Uuid,
        task_kind: TaskKind,
        original_text: Option<&str>,
        config: SessionConfig,
        deps: SessionDeps,
    ) -> Result<Self, SessionError> {
        let now = deps.clock.now_ms();
        let placeholder = Session::new(id, ConversationGraph::default_for(task_kind), config, now);
        let mut live = Self::build(placeholder, deps)?;
        let graph = live.engine.start_session(task_kind, original_text)?;
        live.state.graph = graph;
        live.forward_graph_events();
        if let Some(q) = live.state.graph.pending().cloned() {
            live.announce_question(q.id, &q.question);
        }
        live.emit(ServerEvent::cue("listening"));
        live.persist()?;
        Ok(live)
    }

    /// Rebuilds a live session from its document. Nothing is regenerated;
    /// the active phase's timer restarts now, so time spent disconnected
    /// is not counted.
    pub fn resume(mut state: Session, deps: SessionDeps) -> Result<Self, SessionError> {
        state.ledger.restart_at(deps.clock.now_ms());
        let mut live = Self::build(state, deps)?;
        live.persist()?;
        Ok(live)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.tx.subscribe()
    }

    pub fn take_events(&mut self) -> Vec<ServerEvent> {
        std::mem::take(&mut self.outbox)
    }

    pub fn now_ms(&self) -> u64 {
        self.deps.clock.now_ms()
    }

    pub fn timers(&self) -> TimerSnapshot {
        TimerSnapshot::of(&self.state.ledger, self.now_ms())
    }

    pub fn playback(&self) -> Option<&Playback> {
        self.playback.as_ref()
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.deps.gateway
    }

    fn emit(&mut self, event: ServerEvent) {
        let _ = self.tx.send(event.clone());
        self.outbox.push(event);
    }

    fn persist(&mut self) -> Result<(), SessionError> {
        let now = self.now_ms();
        self.state.ledger.checkpoint(now);
        if let Some(store) = &self.deps.store {
            store.save(&self.state)?;
        }
        Ok(())
    }

    fn forward_graph_events(&mut self) {
        let mut reopened = false;
        for event in self.engine.drain_events() {
            reopened |= event.event == GraphEventKind::Reopened;
            self.emit(ServerEvent::Graph(event));
        }
        if reopened {
            if let Some(old) = self.state.draft.take() {
                self.state.superseded_drafts.push(old);
            }
            self.state.editor_text = None;
        }
    }

    fn set_phase(&mut self, phase: Phase) -> Result<(), SessionError> {
        let before = self.state.ledger.phase;
        self.state.ledger.set_phase(phase, self.now_ms())?;
        if before != phase {
            let timers = self.timers();
            self.emit(ServerEvent::Phase { phase, timers });
        }
        Ok(())
    }

    fn warn(&mut self, message: String) {
        tracing::warn!(session = %self.state.id, %message);
        self.state.warnings.push(message);
    }

    fn announce_question(&mut self, id: u64, text: &str) {
        self.emit(ServerEvent::Question { id, text: text.to_owned() });
        if self.state.config.speak_questions {
            self.speak(text);
        }
    }

    /// Plays `text`, synthesizing through the shared cache. Synthesis
    /// failures are reported but never block the conversation.
    pub fn speak(&mut self, text: &str) {
        let now = self.now_ms();
        let voice = self.state.config.voice.clone();
        let gateway = self.deps.gateway.clone();
        let result = self
            .deps
            .tts
            .get_or_synthesize(text, &voice, now, || gateway.synthesize_with_voice(text, &voice));
        match result {
            Ok((entry, cached)) => {
                self.stop_playback("superseded");
                let duration = wav_duration_ms(&entry.audio);
                let playback =
                    Playback::new(entry.key.clone(), text.to_owned(), now, duration, self.state.config.interruption_window_ms);
                self.playback = Some(playback);
                self.state.last_spoken = Some(text.to_owned());
                self.emit(ServerEvent::PlaybackEvent {
                    action: PlaybackAction::Started,
                    key: entry.key,
                    duration_ms: duration,
                    cached,
                    reason: None,
                });
            }
            Err(e) => {
                let message = format!("speech synthesis failed: {e}");
                self.warn(message.clone());
                self.emit(ServerEvent::error(message));
            }
        }
    }

    /// Stops the current playback if it is still armed. Returns whether
    /// anything was stopped.
    fn stop_playback(&mut self, reason: &str) -> bool {
        let now = self.now_ms();
        match self.playback.take() {
            Some(p) if p.is_armed(now) => {
                self.emit(ServerEvent::PlaybackEvent {
                    action: PlaybackAction::Stopped,
                    key: p.key,
                    duration_ms: 0,
                    cached: false,
                    reason: Some(reason.to_owned()),
                });
                true
            }
            _ => false,
        }
    }

    /// Detected speech onset: barge-in stops playback while it is armed.
    pub fn on_speech_start(&mut self) -> bool {
        self.stop_playback("interrupted")
    }

    /// Routes one transcript: commands first, then the phase decides what
    /// plain speech means.
    pub fn handle_transcript(&mut self, text: &str) -> Result<TranscriptOutcome, SessionError> {
        self.emit(ServerEvent::Transcript { text: text.to_owned() });
        let command = self.deps.registry.recognize(text);
        let result = match &command {
            Some(m) => self.dispatch_command(m.command_id),
            None => self.plain_speech(text),
        };
        let effect = match result {
            Ok(effect) => effect,
            Err(e) => {
                self.emit(ServerEvent::error(e.to_string()));
                self.persist()?;
                return Err(e);
            }
        };
        if let Effect::Rejected { reason } = &effect {
            self.emit(ServerEvent::error(reason.clone()));
        }
        self.persist()?;
        Ok(TranscriptOutcome { command, effect })
    }

    fn dispatch_command(&mut self, id: CommandId) -> Result<Effect, SessionError> {
        let phase = self.state.phase();
        if phase == Phase::Done {
            return Ok(Effect::rejected("session is done"));
        }
        if !self.state.input_enabled {
            return match id {
                CommandId::ContinueWriting => self.resume_input(),
                _ => Ok(Effect::Ignored),
            };
        }
        let questions_only = matches!(
            id,
            CommandId::SkipQuestion | CommandId::NextQuestion | CommandId::PreviousQuestion | CommandId::ModifyAnswer
        );
        if questions_only && phase == Phase::Revision {
            return Ok(Effect::rejected("return to questions first"));
        }
        match id {
            CommandId::SkipQuestion => {
                self.state.modify_target = None;
                match self.engine.skip_question(&mut self.state.graph) {
                    Ok(advance) => self.after_advance(advance, Effect::Skipped),
                    Err(e) => self.qa_rejection(e),
                }
            }
            CommandId::NextQuestion | CommandId::PreviousQuestion => {
                let nav = if id == CommandId::NextQuestion { Navigation::Next } else { Navigation::Previous };
                match self.engine.navigate(&mut self.state.graph, nav) {
                    Ok(cursor) => {
                        self.forward_graph_events();
                        self.state.modify_target = None;
                        let turn = self.state.graph.turns[cursor].clone();
                        if self.state.config.speak_questions {
                            self.speak(&turn.question);
                        }
                        Ok(Effect::Navigated { cursor })
                    }
                    Err(e) => self.qa_rejection(e),
                }
            }
            CommandId::ModifyAnswer => match self.state.graph.active() {
                Some(t) if t.status != TurnStatus::Pending => {
                    let turn_id = t.id;
                    self.state.modify_target = Some(turn_id);
                    self.emit(ServerEvent::cue("say your new answer"));
                    Ok(Effect::ModifyArmed { turn_id })
                }
                _ => Ok(Effect::rejected("nothing to modify")),
            },
            CommandId::PauseWriting => self.pause_input(),
            CommandId::ContinueWriting => Ok(Effect::Ignored),
            CommandId::GoToEditor => {
                if self.state.draft.is_none() {
                    return Ok(Effect::rejected("no draft yet"));
                }
                self.set_phase(Phase::Revision)?;
                Ok(Effect::EditorOpened)
            }
            CommandId::PlayThatAgain => match self.state.last_spoken.clone() {
                Some(text) => {
                    self.speak(&text);
                    Ok(Effect::Replayed)
                }
                None => Ok(Effect::rejected("nothing to replay")),
            },
            CommandId::FinishWriting => {
                if self.state.draft.is_some() {
                    self.set_phase(Phase::Revision)?;
                    return Ok(Effect::EditorOpened);
                }
                match self.engine.finish(&mut self.state.graph) {
                    Ok(()) => {
                        self.forward_graph_events();
                        self.compose()
                    }
                    Err(e) => self.qa_rejection(e),
                }
            }
            CommandId::ReturnToQuestions => {
                self.set_phase(Phase::Drafting)?;
                if let Some(t) = self.state.graph.active().cloned() {
                    self.emit(ServerEvent::Question { id: t.id, text: t.question });
                }
                Ok(Effect::ReturnedToQuestions)
            }
            CommandId::StopSpeaking => {
                if self.stop_playback("stop_command") {
                    Ok(Effect::StoppedSpeaking)
                } else {
                    Ok(Effect::rejected("nothing playing"))
                }
            }
        }
    }

    fn qa_rejection(&mut self, e: QaError) -> Result<Effect, SessionError> {
        match e {
            QaError::Provider(_) => Err(e.into()),
            other => Ok(Effect::rejected(other.to_string())),
        }
    }

    fn plain_speech(&mut self, text: &str) -> Result<Effect, SessionError> {
        if !self.state.input_enabled {
            return Ok(Effect::Ignored);
        }
        match self.state.phase() {
            Phase::Drafting => {}
            Phase::Done => return Ok(Effect::rejected("session is done")),
            _ => return Ok(Effect::Ignored),
        }
        if let Some(target) = self.state.modify_target {
            let policy = self.state.config.invalidation_policy;
            return match self.engine.modify_answer(&mut self.state.graph, target, text, policy) {
                Ok(result) => {
                    self.state.modify_target = None;
                    self.forward_graph_events();
                    if let Some(w) = result.warning {
                        self.warn(w);
                    }
                    match result.new_pending_question {
                        Some(q) => self.announce_question(q.id, &q.question),
                        None => {
                            self.compose()?;
                        }
                    }
                    Ok(Effect::Modified { removed_ids: result.removed_ids })
                }
                Err(e) => self.qa_rejection(e),
            };
        }
        match self.engine.submit_answer(&mut self.state.graph, text) {
            Ok(advance) => self.after_advance(advance, Effect::Answered),
            Err(e) => self.qa_rejection(e),
        }
    }

    /// Asks the next question, or composes when questioning is over.
    /// Returns `DraftReady` in the latter case, `done` otherwise.
    fn after_advance(&mut self, advance: Advance, done: Effect) -> Result<Effect, SessionError> {
        self.forward_graph_events();
        match advance {
            Advance::Question(q) => {
                self.announce_question(q.id, &q.question);
                Ok(done)
            }
            Advance::Generate => self.compose(),
        }
    }

    /// Runs the composition pipeline over the finished graph and opens the
    /// draft for revision.
    fn compose(&mut self) -> Result<Effect, SessionError> {
        self.emit(ServerEvent::cue("composing"));
        let memory = if self.state.config.memory_enabled { self.deps.memory.clone() } else { MemoryContext::default() };
        let composer = Composer::new(
            self.deps.gateway.clone(),
            ComposeConfig { max_passes: self.state.config.max_fact_check_passes },
        )
        .with_memory(memory);
        let outcome = composer.compose(&self.state.graph)?;
        for w in outcome.warnings {
            self.warn(w);
        }
        let draft = outcome.draft;
        self.emit(ServerEvent::DraftReady {
            text: draft.text.clone(),
            tone: draft.tone,
            passes_used: draft.passes_used,
            residual_issues: draft.residual_issues.len(),
        });
        self.state.draft = Some(draft);
        self.set_phase(Phase::Revision)?;
        Ok(Effect::DraftReady)
    }

    pub fn pause_input(&mut self) -> Result<Effect, SessionError> {
        if !self.state.input_enabled {
            return Ok(Effect::Ignored);
        }
        self.state.input_enabled = false;
        self.set_phase(Phase::Paused)?;
        self.stop_playback("paused");
        self.emit(ServerEvent::cue("paused"));
        Ok(Effect::Paused)
    }

    pub fn resume_input(&mut self) -> Result<Effect, SessionError> {
        if self.state.input_enabled {
            return Ok(Effect::Ignored);
        }
        let target = self.state.ledger.resume_to.unwrap_or(Phase::Drafting);
        self.set_phase(target)?;
        self.state.input_enabled = true;
        self.emit(ServerEvent::cue("listening"));
        Ok(Effect::Resumed)
    }

    /// Saves the editor contents. `finalize` ends the session.
    pub fn save_editor(&mut self, text: &str, finalize: bool) -> Result<Effect, SessionError> {
        if self.state.draft.is_none() {
            return Ok(Effect::rejected("no draft yet"));
        }
        if self.state.phase() == Phase::Done {
            return Ok(Effect::rejected("session is done"));
        }
        if self.state.phase() == Phase::Paused {
            self.resume_input()?;
        }
        self.set_phase(Phase::Revision)?;
        self.state.editor_text = Some(text.to_owned());
        if finalize {
            self.set_phase(Phase::Done)?;
        }
        self.persist()?;
        Ok(Effect::EditorSaved)
    }

    /// Feeds little-endian 16-bit PCM. Frames are cut at the segmenter's
    /// frame length; completed utterances are transcribed and routed.
    pub fn feed_audio(&mut self, bytes: &[u8]) -> Result<Vec<TranscriptOutcome>, SessionError> {
        let mut data = Vec::with_capacity(bytes.len() + 1);
        data.extend(self.odd_byte.take());
        data.extend_from_slice(bytes);
        if data.len() % 2 == 1 {
            self.odd_byte = data.pop();
        }
        self.pcm_carry.extend(data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])));

        let frame_ms = self.segmenter.config().frame_ms;
        let frame_len = (u64::from(stepflow_core::segment::SAMPLE_RATE_HZ) * frame_ms / 1000) as usize;
        let mut outcomes = Vec::new();
        while self.pcm_carry.len() >= frame_len {
            let frame: Vec<i16> = self.pcm_carry.drain(..frame_len).collect();
            let events = self.segmenter.feed_pcm(self.stream_ms, &frame)?;
            self.stream_ms += frame_ms;
            for event in events {
                self.emit(ServerEvent::Utterance { kind: event.kind, start_ms: event.start_ms, end_ms: event.end_ms });
                match event.kind {
                    UtteranceKind::SpeechStart => {
                        self.on_speech_start();
                    }
                    UtteranceKind::UtteranceComplete => {
                        let Some(audio) = event.audio_ref else { continue };
                        self.emit(ServerEvent::cue("thinking"));
                        match self.deps.gateway.transcribe(&audio) {
                            Ok(text) if !text.trim().is_empty() => outcomes.push(self.handle_transcript(&text)?),
                            Ok(_) | Err(ProviderError::EmptySegment) => {}
                            Err(e) => {
                                self.emit(ServerEvent::error(e.to_string()));
                            }
                        }
                    }
                    UtteranceKind::DiscardedNoise => {}
                }
            }
        }
        Ok(outcomes)
    }
}

trait DefaultGraph {
    fn default_for(task_kind: TaskKind) -> Self;
}

impl DefaultGraph for ConversationGraph {
    fn default_for(task_kind: TaskKind) -> Self {
        ConversationGraph {
            turns: Vec::new(),
            cursor: 0,
            task_kind,
            original_text: None,
            finished: false,
            next_id: 1,
            skipped_questions: Vec::new(),
            warnings: Vec::new(),
        }
    }
}
