//! Randomized Q&A action sequences against a scripted model, checking the
//! engine's invariants after every step. Shared with the acceptance suite.

#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use serde_json::json;
use stepflow_core::provider::mock::MockScript;
use stepflow_core::provider::Gateway;
use stepflow_core::qa::{
    ConversationGraph, GraphEvent, GraphEventKind, InvalidationPolicy, Navigation, QaConfig, QaEngine, TaskKind,
    TurnStatus,
};
use stepflow_core::text::normalized_key;

pub const QUESTION_POOL: [&str; 10] = [
    "What is the occasion?",
    "Who is the message for?",
    "When does it happen?",
    "Where should people go?",
    "What should people bring?",
    "Is there a dress code?",
    "How should people reply?",
    "What is the budget?",
    "Who else is involved?",
    "Anything else to add?",
];

#[derive(Debug, Clone)]
pub enum Action {
    Answer(String),
    Skip,
    Previous,
    Next,
    Target(usize),
    Modify { pick: usize, answer: String, dependency_aware: bool },
    Finish,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub task: TaskKind,
    /// Model replies in order: a pool index, or `None` for "no follow-up".
    pub replies: Vec<Option<usize>>,
    /// Verdict per later turn id; `None` makes the analysis malformed.
    pub verdicts: Option<Vec<bool>>,
    pub max_questions: usize,
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        any::<bool>(),
        prop::collection::vec(prop_oneof![9 => (0usize..10).prop_map(Some), 1 => Just(None)], 1..30),
        prop::option::weighted(0.8, prop::collection::vec(any::<bool>(), 40)),
        prop_oneof![4 => Just(25usize), 1 => 1usize..8],
    )
        .prop_map(|(reply, mut replies, verdicts, max_questions)| {
            // The opening question must exist.
            if replies[0].is_none() {
                replies[0] = Some(0);
            }
            Scenario { task: if reply { TaskKind::Reply } else { TaskKind::Write }, replies, verdicts, max_questions }
        })
}

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        6 => "[a-z]{1,6}( [a-z]{1,6}){0,3}".prop_map(Action::Answer),
        2 => Just(Action::Skip),
        1 => Just(Action::Previous),
        1 => Just(Action::Next),
        1 => any::<usize>().prop_map(Action::Target),
        2 => (any::<usize>(), "[a-z]{1,6}( [a-z]{1,6}){0,2}", any::<bool>())
            .prop_map(|(pick, answer, dependency_aware)| Action::Modify { pick, answer, dependency_aware }),
        1 => Just(Action::Finish),
    ]
}

pub fn actions() -> impl Strategy<Value = Vec<Action>> {
    prop::collection::vec(action(), 1..25)
}

pub fn script(s: &Scenario) -> MockScript {
    let mut script = MockScript::default().chat(
        "PERSONALIZED first question",
        &json!({"question": QUESTION_POOL[s.replies[0].unwrap_or(0)], "followup_needed": true}).to_string(),
    );
    for reply in &s.replies {
        let body = match reply {
            Some(i) => json!({"question": QUESTION_POOL[*i], "followup_needed": true}),
            None => json!({"question": "", "followup_needed": false}),
        };
        script = script.chat("thinking partner", &body.to_string());
    }
    let analysis = match &s.verdicts {
        Some(v) => json!({
            "affectedQuestions": v.iter().enumerate().map(|(i, affected)| json!({
                "questionId": i + 1,
                "question": "",
                "status": if *affected { "AFFECTED" } else { "UNAFFECTED" },
                "reasoning": "scripted"
            })).collect::<Vec<_>>(),
            "summary": "scripted"
        })
        .to_string(),
        None => "not json at all".to_owned(),
    };
    script.chat("dependency analysis system", &analysis)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub graph: Option<ConversationGraph>,
    pub events: Vec<GraphEvent>,
    pub outcomes: Vec<String>,
}

/// Runs the scenario, returning the trace or the first violated invariant.
pub fn run(s: &Scenario, actions: &[Action]) -> Result<Trace, String> {
    let gateway = Arc::new(Gateway::mock(script(s)));
    let mut engine = QaEngine::new(gateway, QaConfig { max_questions: s.max_questions, policy: InvalidationPolicy::TruncateAll });
    let original = (s.task == TaskKind::Reply).then_some("Can you join the planning call on Monday?");
    let mut trace = Trace { graph: None, events: Vec::new(), outcomes: Vec::new() };
    let mut graph = match engine.start_session(s.task, original) {
        Ok(g) => g,
        Err(e) => {
            trace.outcomes.push(format!("start: {e}"));
            return Ok(trace);
        }
    };
    let mut skipped_seen: Vec<String> = Vec::new();
    check_step(&graph, &mut engine, &mut skipped_seen, &mut trace)?;

    for action in actions {
        let before = graph.clone();
        let result: Result<String, String> = match action {
            Action::Answer(a) => engine.submit_answer(&mut graph, a).map(|adv| format!("{adv:?}")).map_err(|e| e.to_string()),
            Action::Skip => engine.skip_question(&mut graph).map(|adv| format!("{adv:?}")).map_err(|e| e.to_string()),
            Action::Previous => engine.navigate(&mut graph, Navigation::Previous).map(|c| c.to_string()).map_err(|e| e.to_string()),
            Action::Next => engine.navigate(&mut graph, Navigation::Next).map(|c| c.to_string()).map_err(|e| e.to_string()),
            Action::Target(k) => {
                let id = graph.turns[k % graph.turns.len()].id;
                engine.navigate(&mut graph, Navigation::Target(id)).map(|c| c.to_string()).map_err(|e| e.to_string())
            }
            Action::Modify { pick, answer, dependency_aware } => {
                let target = graph.turns[pick % graph.turns.len()].clone();
                let policy = if *dependency_aware { InvalidationPolicy::DependencyAware } else { InvalidationPolicy::TruncateAll };
                match engine.modify_answer(&mut graph, target.id, answer, policy) {
                    Ok(r) => {
                        check_modify(&before, &graph, target.id, policy, &r.removed_ids)?;
                        Ok(format!("{r:?}"))
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            Action::Finish => engine.finish(&mut graph).map(|_| "finished".to_owned()).map_err(|e| e.to_string()),
        };
        match result {
            Ok(o) => trace.outcomes.push(o),
            Err(e) => {
                if graph != before {
                    return Err(format!("failed {action:?} ({e}) still changed the graph"));
                }
                trace.outcomes.push(format!("error: {e}"));
            }
        }
        check_step(&graph, &mut engine, &mut skipped_seen, &mut trace)?;
    }
    trace.graph = Some(graph);
    Ok(trace)
}

fn check_step(
    graph: &ConversationGraph,
    engine: &mut QaEngine,
    skipped_seen: &mut Vec<String>,
    trace: &mut Trace,
) -> Result<(), String> {
    graph.check_invariants()?;
    for pair in graph.turns.windows(2) {
        if pair[0].id >= pair[1].id {
            return Err(format!("ids not increasing: {} then {}", pair[0].id, pair[1].id));
        }
    }
    let pending = graph.turns.iter().filter(|t| t.status == TurnStatus::Pending).count();
    if pending > 1 || (pending == 1 && graph.turns.last().map(|t| t.status) != Some(TurnStatus::Pending)) {
        return Err("a pending turn that is not last".into());
    }
    for event in engine.drain_events() {
        if event.event == GraphEventKind::QuestionAdded {
            for id in &event.ids {
                let q = graph.turn(*id).map(|t| normalized_key(&t.question)).unwrap_or_default();
                if skipped_seen.contains(&q) {
                    return Err(format!("re-asked skipped question {q:?}"));
                }
            }
        }
        trace.events.push(event);
    }
    for q in &graph.skipped_questions {
        let key = normalized_key(q);
        if !skipped_seen.contains(&key) {
            skipped_seen.push(key);
        }
    }
    for seen in skipped_seen.iter() {
        if !graph.skipped_questions.iter().any(|q| &normalized_key(q) == seen) {
            return Err(format!("skip set lost {seen:?}"));
        }
    }
    Ok(())
}

fn check_modify(
    before: &ConversationGraph,
    after: &ConversationGraph,
    changed: u64,
    policy: InvalidationPolicy,
    removed: &[u64],
) -> Result<(), String> {
    let turn = after.turn(changed).ok_or("modified turn disappeared")?;
    if turn.status != TurnStatus::Answered {
        return Err("modified turn is not answered".into());
    }
    for t in before.turns.iter().filter(|t| t.id < changed) {
        if after.turn(t.id) != Some(t) {
            return Err(format!("turn {} before the change was altered", t.id));
        }
    }
    if removed.iter().any(|id| *id <= changed) {
        return Err(format!("removed ids {removed:?} include turns up to {changed}"));
    }
    if policy == InvalidationPolicy::TruncateAll {
        let max_resolved = after.turns.iter().filter(|t| t.status != TurnStatus::Pending).map(|t| t.id).max();
        if max_resolved != Some(changed) {
            return Err(format!("truncation kept resolved turn {max_resolved:?} beyond {changed}"));
        }
    }
    Ok(())
}
