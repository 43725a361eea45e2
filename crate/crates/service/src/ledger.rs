//! Drafting/revision time accounting.
//!
//! Only one phase is active at a time. Leaving a phase adds its elapsed time
//! to that phase's accumulator; paused time goes to a separate accumulator
//! and never counts as drafting or revision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Drafting,
    Revision,
    Paused,
    Done,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("illegal phase transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLedger {
    pub phase: Phase,
    pub accumulated_drafting_ms: u64,
    pub accumulated_revision_ms: u64,
    pub accumulated_paused_ms: u64,
    pub active_phase_started_at: u64,
    /// The phase a pause returns to.
    pub resume_to: Option<Phase>,
}

impl PhaseLedger {
    pub fn start(now_ms: u64) -> Self {
        Self {
            phase: Phase::Drafting,
            accumulated_drafting_ms: 0,
            accumulated_revision_ms: 0,
            accumulated_paused_ms: 0,
            active_phase_started_at: now_ms,
            resume_to: None,
        }
    }

    fn legal(from: Phase, to: Phase, resume_to: Option<Phase>) -> bool {
        use Phase::*;
        match (from, to) {
            (Done, _) => false,
            (Drafting, Revision) | (Revision, Drafting) => true,
            (Drafting | Revision, Paused) => true,
            (Drafting | Revision, Done) => true,
            (Paused, target) => Some(target) == resume_to,
            _ => false,
        }
    }

    /// Moves to `to`, crediting the outgoing phase. Re-entering the current
    /// phase is a no-op.
    pub fn set_phase(&mut self, to: Phase, now_ms: u64) -> Result<(), IllegalTransition> {
        if to == self.phase && to != Phase::Done {
            return Ok(());
        }
        if !Self::legal(self.phase, to, self.resume_to) {
            return Err(IllegalTransition { from: self.phase, to });
        }
        self.credit(now_ms);
        self.resume_to = match to {
            Phase::Paused => Some(self.phase),
            _ => None,
        };
        self.phase = to;
        self.active_phase_started_at = now_ms;
        Ok(())
    }

    fn credit(&mut self, now_ms: u64) {
        let elapsed = now_ms.saturating_sub(self.active_phase_started_at);
        match self.phase {
            Phase::Drafting => self.accumulated_drafting_ms += elapsed,
            Phase::Revision => self.accumulated_revision_ms += elapsed,
            Phase::Paused => self.accumulated_paused_ms += elapsed,
            Phase::Done => {}
        }
        self.active_phase_started_at = now_ms;
    }

    /// Credits the active phase up to `now_ms` without leaving it, so a
    /// saved ledger carries every elapsed millisecond.
    pub fn checkpoint(&mut self, now_ms: u64) {
        self.credit(now_ms);
    }

    /// Restarts the active phase's timer without crediting the gap, e.g.
    /// after a session is reloaded from disk.
    pub fn restart_at(&mut self, now_ms: u64) {
        self.active_phase_started_at = now_ms;
    }

    fn ongoing(&self, phase: Phase, now_ms: u64) -> u64 {
        if self.phase == phase {
            now_ms.saturating_sub(self.active_phase_started_at)
        } else {
            0
        }
    }

    pub fn drafting_ms(&self, now_ms: u64) -> u64 {
        self.accumulated_drafting_ms + self.ongoing(Phase::Drafting, now_ms)
    }

    pub fn revision_ms(&self, now_ms: u64) -> u64 {
        self.accumulated_revision_ms + self.ongoing(Phase::Revision, now_ms)
    }

    pub fn paused_ms(&self, now_ms: u64) -> u64 {
        self.accumulated_paused_ms + self.ongoing(Phase::Paused, now_ms)
    }
}

/// Timer totals as reported to clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerSnapshot {
    pub drafting_ms: u64,
    pub revision_ms: u64,
    pub paused_ms: u64,
}

impl TimerSnapshot {
    pub fn of(ledger: &PhaseLedger, now_ms: u64) -> Self {
        Self {
            drafting_ms: ledger.drafting_ms(now_ms),
            revision_ms: ledger.revision_ms(now_ms),
            paused_ms: ledger.paused_ms(now_ms),
        }
    }
}
