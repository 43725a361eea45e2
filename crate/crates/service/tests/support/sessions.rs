//! Generators for arbitrary session documents.

use proptest::prelude::*;
use stepflow_core::compose::{FactIssue, FinalDraft, IssueType, PassRecord};
use stepflow_core::eval::EditCounts;
use stepflow_core::qa::{ConversationGraph, InvalidationPolicy, QuestionTurn, TaskKind, TurnStatus};
use stepflow_core::tone::ToneLabel;
use stepflow_service::{Phase, PhaseLedger, Session, SessionConfig};
use uuid::Uuid;

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 ,.'\"?!\u{e9}\u{201c}\u{201d}\n-]{0,40}"
}

fn graph() -> impl Strategy<Value = ConversationGraph> {
    (
        prop::collection::vec((text(), prop::option::of(text()), any::<bool>(), prop::option::of(any::<bool>())), 0..10),
        any::<bool>(),
        prop::option::of(text()),
        any::<bool>(),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec(text(), 0..2),
    )
        .prop_map(|(raw, reply, original_text, finished, skipped_questions, warnings)| {
            let n = raw.len();
            let turns: Vec<QuestionTurn> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (question, answer, skipped, followup))| {
                    let status = if i + 1 == n && !finished {
                        TurnStatus::Pending
                    } else if skipped {
                        TurnStatus::Skipped
                    } else {
                        TurnStatus::Answered
                    };
                    let answer = if status == TurnStatus::Answered { Some(answer.unwrap_or_default()) } else { None };
                    QuestionTurn { id: i as u64 + 1, question, answer, status, followup_needed_after: followup }
                })
                .collect();
            ConversationGraph {
                cursor: n.saturating_sub(1),
                next_id: n as u64 + 1,
                turns,
                task_kind: if reply { TaskKind::Reply } else { TaskKind::Write },
                original_text,
                finished,
                skipped_questions,
                warnings,
            }
        })
}

fn draft() -> impl Strategy<Value = FinalDraft> {
    (text(), 0usize..14, text(), prop::collection::vec((any::<bool>(), text(), 0usize..5), 1..4))
        .prop_map(|(text, tone, tone_reasoning, passes)| {
            let provenance: Vec<PassRecord> = passes
                .iter()
                .enumerate()
                .map(|(i, (passed, detail, edits))| PassRecord {
                    pass: i as u32 + 1,
                    passed: *passed,
                    issues: if *passed {
                        vec![]
                    } else {
                        vec![FactIssue { issue_type: IssueType::Missing, detail: detail.clone(), qa_reference: "1".into() }]
                    },
                    draft_sha256: format!("{:064x}", i),
                    diff: (i > 0).then_some(EditCounts { insertions: *edits, deletions: 0, replacements: 1, total_edits: edits + 1 }),
                })
                .collect();
            FinalDraft {
                text,
                tone: ToneLabel::ALL[tone],
                tone_reasoning,
                passes_used: provenance.len() as u32,
                residual_issues: provenance.last().map(|p| p.issues.clone()).unwrap_or_default(),
                provenance,
            }
        })
}

fn ledger() -> impl Strategy<Value = PhaseLedger> {
    (0usize..4, any::<u32>(), any::<u32>(), any::<u32>(), any::<u64>(), any::<bool>()).prop_map(|(p, d, r, z, at, back)| {
        let phase = [Phase::Drafting, Phase::Revision, Phase::Paused, Phase::Done][p];
        PhaseLedger {
            phase,
            accumulated_drafting_ms: d.into(),
            accumulated_revision_ms: r.into(),
            accumulated_paused_ms: z.into(),
            active_phase_started_at: at,
            resume_to: (phase == Phase::Paused).then_some(if back { Phase::Revision } else { Phase::Drafting }),
        }
    })
}

fn config() -> impl Strategy<Value = SessionConfig> {
    (0.0f64..=1.0, 1u32..20, any::<u32>(), any::<bool>(), any::<bool>()).prop_map(|(t, passes, window, aware, mem)| SessionConfig {
        similarity_threshold: t,
        max_fact_check_passes: passes,
        thinking_window_ms: u64::from(window),
        invalidation_policy: if aware { InvalidationPolicy::DependencyAware } else { InvalidationPolicy::TruncateAll },
        memory_enabled: mem,
        ..SessionConfig::default()
    })
}

pub fn session() -> impl Strategy<Value = Session> {
    (
        any::<u128>(),
        graph(),
        prop::option::of(draft()),
        prop::collection::vec(draft(), 0..2),
        prop::option::of(text()),
        ledger(),
        config(),
        (any::<bool>(), prop::option::of(1u64..10), prop::option::of(text()), prop::collection::vec(text(), 0..2), any::<u64>()),
    )
        .prop_map(|(id, graph, draft, superseded_drafts, editor_text, ledger, config, rest)| {
            let (input_enabled, modify_target, last_spoken, warnings, created_at_ms) = rest;
            Session {
                id: Uuid::from_u128(id),
                created_at_ms,
                graph,
                draft,
                superseded_drafts,
                editor_text,
                ledger,
                config,
                input_enabled,
                modify_target,
                last_spoken,
                warnings,
            }
        })
}
