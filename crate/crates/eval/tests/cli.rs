//! The `stepflow-eval` binary over small files.

mod support;

use std::path::Path;
use std::process::Command;

use serde_json::Value;
use stepflow_core::eval::DraftPair;
use stepflow_core::qa::TaskKind;
use support::corpus;

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let text: String = rows.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

fn eval(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stepflow-eval")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn pairs(dir: &Path) -> String {
    let path = dir.join("pairs.jsonl");
    write_jsonl(
        &path,
        &[
            DraftPair {
                original: "We meet at noon in the park.".into(),
                revised: "We meet at one in the park.".into(),
                task: TaskKind::Write,
                tool_tag: "stepflow".into(),
            },
            DraftPair {
                original: "Thanks for the note.".into(),
                revised: "Thanks for the kind note. See you soon.".into(),
                task: TaskKind::Reply,
                tool_tag: "stepflow".into(),
            },
        ],
    );
    path.display().to_string()
}

#[test]
fn diff_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = pairs(dir.path());
    let (ok, stdout, _) = eval(&["diff", "--input", &input]);
    assert!(ok);
    let rows: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(rows[0]["replacements"], 1);
    assert_eq!(rows[0]["total_edits"], 1);
    assert_eq!(rows[1]["task"], "reply");
    assert_eq!(rows[1]["insertions"], 2);

    let csv_path = dir.path().join("diff.csv");
    let (ok, _, _) = eval(&["diff", "--input", &input, "--mode", "per-word", "--out", csv_path.to_str().unwrap()]);
    assert!(ok);
    let csv = std::fs::read_to_string(csv_path).unwrap();
    assert!(csv.starts_with("tool_tag,task,insertions,deletions,replacements,total_edits\n"), "{csv}");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn readability_diversity_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = pairs(dir.path());
    let (ok, stdout, _) = eval(&["readability", "--input", &input]);
    assert!(ok);
    let rows: Value = serde_json::from_str(&stdout).unwrap();
    assert!(rows[0]["original_fre"].as_f64().unwrap() > 60.0);

    let (ok, stdout, _) = eval(&["diversity", "--input", &input]);
    assert!(ok);
    let rows: Value = serde_json::from_str(&stdout).unwrap();
    let d = rows[0]["semantic_diversity"].as_f64().unwrap();
    assert!(d > 0.0 && d < 1.0, "{d}");

    let report_path = dir.path().join("report.csv");
    let (ok, _, _) = eval(&["report", "--input", &input, "--out", report_path.to_str().unwrap()]);
    assert!(ok);
    let csv = std::fs::read_to_string(report_path).unwrap();
    assert!(csv.lines().next().unwrap().contains("total_edits"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn eqf_tone_and_questions() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann.jsonl");
    write_jsonl(&ann, &corpus::annotations(3, 1, 0));
    let (ok, stdout, _) = eval(&["eqf", "--input", ann.to_str().unwrap()]);
    assert!(ok);
    let row: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(row["eqf"], 0.75);
    assert_eq!(row["total"], 4);

    let tone = dir.path().join("tone.jsonl");
    write_jsonl(&tone, &corpus::tone_items());
    let (ok, stdout, _) = eval(&["tone", "--input", tone.to_str().unwrap()]);
    assert!(ok);
    assert!(stdout.contains("macro avg") && stdout.contains("apologetic"));
    let json_out = dir.path().join("tone.json");
    let (ok, _, stderr) = eval(&["tone", "--input", tone.to_str().unwrap(), "--out", json_out.to_str().unwrap()]);
    assert!(ok && stderr.contains("weighted avg"));
    let scores: Value = serde_json::from_str(&std::fs::read_to_string(json_out).unwrap()).unwrap();
    assert!((scores["accuracy"].as_f64().unwrap() - corpus::TONE_ACCURACY).abs() < 1e-12);

    let graphs = dir.path().join("graphs.jsonl");
    write_jsonl(&graphs, &corpus::question_corpus());
    let (ok, stdout, _) = eval(&["questions", "--input", graphs.to_str().unwrap()]);
    assert!(ok);
    let stats: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(stats["sessions"], 25);
    assert!((stats["mean_received"].as_f64().unwrap() - 7.96).abs() < 1e-9);
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"original\": 1}\n").unwrap();
    let (ok, _, stderr) = eval(&["diff", "--input", bad.to_str().unwrap()]);
    assert!(!ok);
    assert!(stderr.starts_with("stepflow-eval:"), "{stderr}");
    let (ok, _, _) = eval(&["diff", "--input", dir.path().join("missing.jsonl").to_str().unwrap()]);
    assert!(!ok);
}
