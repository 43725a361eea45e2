//! Headless replay of the scripted write session, run through the binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use stepflow_core::eval::{CountMode, DraftPair};

pub fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/write_session.jsonl")
}

pub const ARTIFACTS: [&str; 4] = ["session.json", "events.jsonl", "draft_pair.jsonl", "provenance.jsonl"];

fn replay_into(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_stepflow"))
        .arg("replay")
        .arg(fixture())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("replay exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
    }
    Ok(())
}

#[derive(Debug)]
pub struct E2eSummary {
    pub turns: usize,
    pub skipped: usize,
    pub passes_used: u64,
    pub drafting_ms: u64,
    pub revision_ms: u64,
    pub answer_rate: f64,
    pub total_edits: usize,
}

fn check(ok: bool, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.to_owned())
    }
}

/// Replays twice, requires byte-identical artifacts, then scores them
/// with the evaluation library.
pub fn run_twice_and_score() -> Result<E2eSummary, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    replay_into(a.path())?;
    replay_into(b.path())?;
    for name in ARTIFACTS {
        let x = std::fs::read(a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(x == y, &format!("{name} differs between runs"))?;
    }

    let session_path = a.path().join("session.json");
    let session: Value = serde_json::from_slice(&std::fs::read(&session_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(session["ledger"]["phase"] == "done", "session did not finish")?;
    let draft = &session["draft"];
    let passes_used = draft["passes_used"].as_u64().ok_or("no draft")?;
    let provenance = std::fs::read_to_string(a.path().join("provenance.jsonl")).map_err(|e| e.to_string())?;
    check(provenance.lines().count() as u64 == passes_used, "provenance lines != passes_used")?;

    let graphs = stepflow_eval::load_graphs(&session_path).map_err(|e| e.to_string())?;
    let graph = graphs.first().ok_or("no graph")?;
    let stats = stepflow_eval::session_stats(&graphs).map_err(|e| e.to_string())?;
    let pairs: Vec<DraftPair> =
        stepflow_eval::read_jsonl(&a.path().join("draft_pair.jsonl")).map_err(|e| e.to_string())?;
    let metrics = stepflow_eval::metrics(&pairs, CountMode::Span, None).map_err(|e| e.to_string())?;
    let rows = stepflow_eval::diff_rows(&metrics);
    check(rows.len() == 1 && rows[0].tool_tag == "stepflow", "expected one stepflow draft pair")?;

    let events = std::fs::read_to_string(a.path().join("events.jsonl")).map_err(|e| e.to_string())?;
    let drafts = events.lines().filter(|l| l.contains("\"type\":\"draft_ready\"")).count();
    check(drafts == 1, &format!("{drafts} draft_ready events"))?;

    let ledger = &session["ledger"];
    Ok(E2eSummary {
        turns: graph.turns.len(),
        skipped: graph.turns.iter().filter(|t| t.status == stepflow_core::qa::TurnStatus::Skipped).count(),
        passes_used,
        drafting_ms: ledger["accumulated_drafting_ms"].as_u64().unwrap_or_default(),
        revision_ms: ledger["accumulated_revision_ms"].as_u64().unwrap_or_default(),
        answer_rate: stats.answer_rate,
        total_edits: rows[0].total_edits,
    })
}
