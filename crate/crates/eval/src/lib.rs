//! File-level plumbing for the metrics CLI: JSONL readers, flat result
//! rows and CSV/JSON writers.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stepflow_core::eval::{
    self, pair_metrics, CountMode, DraftPair, EqfCounts, MetricError, MetricReport, PairMetrics, QuestionAnnotation, ToneItem,
    ToneScores,
};
use stepflow_core::provider::Embedder;
use stepflow_core::qa::{question_stats, ConversationGraph, QuestionStats};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Invalid(String),
    #[error("output: {0}")]
    Output(String),
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Input { path: path.display().to_string(), message: e.to_string() })?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Line { path: origin.into(), line: n + 1, message: e.to_string() })
        })
        .collect()
}

/// Accepts a session document (`{"graph": ...}`), a bare graph, a JSON
/// array of either, or JSONL of either.
pub fn load_graphs(path: &Path) -> Result<Vec<ConversationGraph>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Input { path: path.display().to_string(), message: e.to_string() })?;
    let origin = path.display().to_string();
    let values: Vec<serde_json::Value> = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(serde_json::Value::Array(items)) => items,
        Ok(v) => vec![v],
        Err(_) => parse_jsonl(&text, &origin)?,
    };
    values
        .into_iter()
        .map(|mut v| {
            if let Some(graph) = v.get_mut("graph") {
                v = graph.take();
            }
            serde_json::from_value(v).map_err(|e| EvalError::Input { path: origin.clone(), message: e.to_string() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub tool_tag: String,
    pub task: String,
    pub insertions: usize,
    pub deletions: usize,
    pub replacements: usize,
    pub total_edits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityRow {
    pub tool_tag: String,
    pub task: String,
    pub original_fre: f64,
    pub original_fk_grade: f64,
    pub original_avg_sentence_len: f64,
    pub original_ttr: f64,
    pub revised_fre: f64,
    pub revised_fk_grade: f64,
    pub revised_avg_sentence_len: f64,
    pub revised_ttr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub tool_tag: String,
    pub task: String,
    pub semantic_diversity: f64,
}

fn task_name(m: &PairMetrics) -> String {
    serde_json::to_value(m.task).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

pub fn metrics(pairs: &[DraftPair], mode: CountMode, embedder: Option<&dyn Embedder>) -> Result<Vec<PairMetrics>, EvalError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty.into());
    }
    pairs.iter().map(|p| pair_metrics(p, mode, embedder).map_err(EvalError::from)).collect()
}

pub fn diff_rows(metrics: &[PairMetrics]) -> Vec<DiffRow> {
    metrics
        .iter()
        .map(|m| DiffRow {
            tool_tag: m.tool_tag.clone(),
            task: task_name(m),
            insertions: m.revision_effort.insertions,
            deletions: m.revision_effort.deletions,
            replacements: m.revision_effort.replacements,
            total_edits: m.revision_effort.total_edits,
        })
        .collect()
}

pub fn readability_rows(metrics: &[PairMetrics]) -> Vec<ReadabilityRow> {
    metrics
        .iter()
        .map(|m| ReadabilityRow {
            tool_tag: m.tool_tag.clone(),
            task: task_name(m),
            original_fre: m.original.fre,
            original_fk_grade: m.original.fk_grade,
            original_avg_sentence_len: m.original.avg_sentence_len,
            original_ttr: m.original.ttr,
            revised_fre: m.revised.fre,
            revised_fk_grade: m.revised.fk_grade,
            revised_avg_sentence_len: m.revised.avg_sentence_len,
            revised_ttr: m.revised.ttr,
        })
        .collect()
}

pub fn diversity_rows(metrics: &[PairMetrics]) -> Vec<DiversityRow> {
    metrics
        .iter()
        .filter_map(|m| {
            m.semantic_diversity.map(|d| DiversityRow { tool_tag: m.tool_tag.clone(), task: task_name(m), semantic_diversity: d })
        })
        .collect()
}

/// Corpus means flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub count: usize,
    pub mean_insertions: f64,
    pub mean_deletions: f64,
    pub mean_replacements: f64,
    pub mean_total_edits: f64,
    pub fre: f64,
    pub fk_grade: f64,
    pub avg_sentence_len: f64,
    pub ttr: f64,
    pub original_fre: f64,
    pub original_fk_grade: f64,
    pub original_avg_sentence_len: f64,
    pub original_ttr: f64,
}

impl From<&MetricReport> for ReportRow {
    fn from(r: &MetricReport) -> Self {
        Self {
            count: r.count,
            mean_insertions: r.revision_effort.insertions,
            mean_deletions: r.revision_effort.deletions,
            mean_replacements: r.revision_effort.replacements,
            mean_total_edits: r.revision_effort.total_edits,
            fre: r.fre,
            fk_grade: r.fk_grade,
            avg_sentence_len: r.avg_sentence_len,
            ttr: r.ttr,
            original_fre: r.original_fre,
            original_fk_grade: r.original_fk_grade,
            original_avg_sentence_len: r.original_avg_sentence_len,
            original_ttr: r.original_ttr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqfRow {
    pub necessary: usize,
    pub unnecessary: usize,
    pub skipped: usize,
    pub total: usize,
    pub eqf: f64,
}

pub fn eqf_counts(annotations: &[QuestionAnnotation]) -> Result<EqfRow, EvalError> {
    let labels: Vec<_> = annotations.iter().map(|a| a.label).collect();
    let counts = EqfCounts::tally(&labels);
    let eqf = counts.eqf().map_err(|e| EvalError::Invalid(e.to_string()))?;
    Ok(EqfRow {
        necessary: counts.necessary,
        unnecessary: counts.unnecessary,
        skipped: counts.skipped,
        total: counts.total(),
        eqf,
    })
}

pub fn tone_scores(items: &[ToneItem]) -> Result<ToneScores, EvalError> {
    let gold: Vec<&str> = items.iter().map(|i| i.gold.as_str()).collect();
    let predicted: Vec<&str> = items.iter().map(|i| i.predicted.as_str()).collect();
    eval::tone_eval(&gold, &predicted).map_err(|e| EvalError::Invalid(e.to_string()))
}

pub fn session_stats(graphs: &[ConversationGraph]) -> Result<QuestionStats, EvalError> {
    question_stats(graphs).map_err(|e| EvalError::Invalid(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// From the output file extension; JSON unless it is `.csv`.
    pub fn of(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| EvalError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Output(e.to_string()))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("results serialize") + "\n"
}
