//! JSON frames pushed to clients over the session stream.

use serde::{Deserialize, Serialize};
use stepflow_core::qa::GraphEvent;
use stepflow_core::segment::UtteranceKind;
use stepflow_core::tone::ToneLabel;

use crate::ledger::{Phase, TimerSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaybackAction {
    Started,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Question {
        id: u64,
        text: String,
    },
    StatusCue {
        cue: String,
    },
    PlaybackEvent {
        action: PlaybackAction,
        key: String,
        #[serde(default)]
        duration_ms: u64,
        #[serde(default)]
        cached: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    DraftReady {
        text: String,
        tone: ToneLabel,
        passes_used: u32,
        residual_issues: usize,
    },
    Error {
        message: String,
    },
    Graph(GraphEvent),
    Phase {
        phase: Phase,
        timers: TimerSnapshot,
    },
    Transcript {
        text: String,
    },
    Utterance {
        kind: UtteranceKind,
        start_ms: u64,
        end_ms: u64,
    },
}

impl ServerEvent {
    pub fn cue(cue: &str) -> Self {
        Self::StatusCue { cue: cue.to_owned() }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self::Error { message: message.into() }
    }
}
