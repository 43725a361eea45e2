//! Orchestration engine for voice-first, scaffolded text composition.
//!
//! The crate is organised around the life of one composition:
//!
//! - [`command`] spots voice macros ("skip question", "go to editor") in transcripts.
//! - [`segment`] turns an audio envelope into utterances using a thinking window.
//! - [`provider`] renders prompt templates and talks to chat, transcription,
//!   speech and embedding backends (live HTTP or scripted mocks).
//! - [`qa`] runs the adaptive question loop over a linear conversation graph.
//! - [`compose`] classifies tone, drafts, and runs the bounded fact-check loop.
//! - [`memory`] holds optional per-user facts injected into prompts.
//! - [`eval`] computes revision-effort, readability, diversity, EQF and tone metrics.

pub mod command;
pub mod compose;
pub mod eval;
pub mod memory;
pub mod provider;
pub mod qa;
pub mod segment;
pub mod text;
pub mod tone;

pub use command::{CommandId, CommandMatch, CommandRegistry};
pub use compose::{ComposeConfig, FinalDraft};
pub use qa::{ConversationGraph, QaEngine, QuestionTurn, TaskKind};
