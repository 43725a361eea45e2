//! Synthetic corpora with hand-counted expected results.

#![allow(dead_code)]

use stepflow_core::eval::{QuestionAnnotation, QuestionLabel, ToneItem};
use stepflow_core::qa::{ConversationGraph, QuestionTurn, TaskKind, TurnStatus};

/// Annotated questions: necessary, then skipped, then unnecessary.
pub fn annotations(necessary: usize, skipped: usize, unnecessary: usize) -> Vec<QuestionAnnotation> {
    let mut out = Vec::new();
    for (label, n) in [(QuestionLabel::Necessary, necessary), (QuestionLabel::Skipped, skipped), (QuestionLabel::Unnecessary, unnecessary)] {
        out.extend((0..n).map(|i| QuestionAnnotation { question: format!("question {i}"), label }));
    }
    out
}

/// Ten labeled tone items and their hand-computed scores.
pub fn tone_items() -> Vec<ToneItem> {
    let rows = [
        ("formal", "formal"),
        ("formal", "formal"),
        ("formal", "informal"),
        ("informal", "informal"),
        ("informal", "formal"),
        ("urgent", "urgent"),
        ("urgent", "urgent"),
        ("urgent", "urgent"),
        ("apologetic", "urgent"),
        ("apologetic", "apologetic"),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, (g, p))| ToneItem { text: format!("message {i}"), gold: (*g).into(), predicted: (*p).into() })
        .collect()
}

pub const TONE_ACCURACY: f64 = 7.0 / 10.0;
pub const TONE_MACRO_F1: f64 = 113.0 / 168.0;
pub const TONE_WEIGHTED_F1: f64 = 29.0 / 42.0;
/// (label, precision, recall, f1) sorted by label.
pub const TONE_PER_CLASS: [(&str, f64, f64, f64); 4] = [
    ("apologetic", 1.0, 0.5, 2.0 / 3.0),
    ("formal", 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0),
    ("informal", 0.5, 0.5, 0.5),
    ("urgent", 0.75, 1.0, 6.0 / 7.0),
];

/// Write sessions with `turns` questions each, `skips` of them skipped
/// (spread one per session from the front).
pub fn write_graphs(turns: &[usize], skips: usize) -> Vec<ConversationGraph> {
    turns
        .iter()
        .enumerate()
        .map(|(s, &n)| {
            let skipped_here = usize::from(s < skips);
            let turns: Vec<QuestionTurn> = (0..n)
                .map(|i| {
                    let skipped = i == 1 && skipped_here == 1;
                    QuestionTurn {
                        id: i as u64 + 1,
                        question: format!("What about point {i}?"),
                        answer: (!skipped).then(|| "a short answer".to_owned()),
                        status: if skipped { TurnStatus::Skipped } else { TurnStatus::Answered },
                        followup_needed_after: Some(i + 1 < n),
                    }
                })
                .collect();
            ConversationGraph {
                cursor: n - 1,
                next_id: n as u64 + 1,
                skipped_questions: turns.iter().filter(|t| t.status == TurnStatus::Skipped).map(|t| t.question.clone()).collect(),
                turns,
                task_kind: TaskKind::Write,
                original_text: None,
                finished: true,
                warnings: Vec::new(),
            }
        })
        .collect()
}

/// Twenty-five write sessions: 199 questions received, 24 skipped.
pub fn question_corpus() -> Vec<ConversationGraph> {
    let mut turns = vec![8; 24];
    turns.push(7);
    write_graphs(&turns, 24)
}
