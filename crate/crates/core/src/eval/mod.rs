//! Text metrics over draft pairs, question annotations and labeled tones.

pub mod classify;
pub mod diff;
pub mod diversity;
pub mod eqf;
pub mod readability;

use serde::{Deserialize, Serialize};

pub use classify::{tone_eval, ClassScore, ToneScores};
pub use diff::{word_diff, word_diff_with, CountMode, EditCounts};
pub use diversity::semantic_diversity;
pub use eqf::{eqf, EqfCounts, QuestionLabel};
pub use readability::{
    avg_sentence_length, fk_grade, flesch_reading_ease, ttr, ReadabilityError, ReadabilityScores,
};

use crate::provider::{Embedder, ProviderError};
use crate::qa::TaskKind;
use crate::text::collapse_whitespace;

/// A speech-generated draft and the user's final version of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftPair {
    pub original: String,
    pub revised: String,
    pub task: TaskKind,
    #[serde(default)]
    pub tool_tag: String,
}

impl DraftPair {
    /// Both sides with whitespace runs collapsed.
    pub fn normalized(&self) -> (String, String) {
        (collapse_whitespace(&self.original), collapse_whitespace(&self.revised))
    }
}

/// Annotation line: `{"question": "...", "label": "necessary|unnecessary|skipped"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAnnotation {
    #[serde(default)]
    pub question: String,
    pub label: QuestionLabel,
}

/// Tone line: `{"text": "...", "gold": "...", "predicted": "..."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneItem {
    #[serde(default)]
    pub text: String,
    pub gold: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub tool_tag: String,
    pub task: TaskKind,
    pub revision_effort: EditCounts,
    pub original: ReadabilityScores,
    pub revised: ReadabilityScores,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_diversity: Option<f64>,
}

pub fn pair_metrics(
    pair: &DraftPair,
    mode: CountMode,
    embedder: Option<&dyn Embedder>,
) -> Result<PairMetrics, MetricError> {
    let (original, revised) = pair.normalized();
    let semantic_diversity = match embedder {
        Some(e) => Some(semantic_diversity(&original, &revised, e)?),
        None => None,
    };
    Ok(PairMetrics {
        tool_tag: pair.tool_tag.clone(),
        task: pair.task,
        revision_effort: word_diff_with(&original, &revised, mode),
        original: readability::scores(&original)?,
        revised: readability::scores(&revised)?,
        semantic_diversity,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Readability(#[from] ReadabilityError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("empty corpus")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanEdits {
    pub insertions: f64,
    pub deletions: f64,
    pub replacements: f64,
    pub total_edits: f64,
}

/// Corpus means. Readability fields describe the revised drafts; the
/// `original_*` counterparts describe the drafts before revision.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub revision_effort: MeanEdits,
    pub fre: f64,
    pub fk_grade: f64,
    pub avg_sentence_len: f64,
    pub ttr: f64,
    pub original_fre: f64,
    pub original_fk_grade: f64,
    pub original_avg_sentence_len: f64,
    pub original_ttr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_diversity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eqf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tone_scores: Option<ToneScores>,
}

pub fn summarize(metrics: &[PairMetrics]) -> Result<MetricReport, MetricError> {
    if metrics.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = metrics.len() as f64;
    let mean = |f: &dyn Fn(&PairMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
    let diversities: Vec<f64> = metrics.iter().filter_map(|m| m.semantic_diversity).collect();
    Ok(MetricReport {
        count: metrics.len(),
        revision_effort: MeanEdits {
            insertions: mean(&|m| m.revision_effort.insertions as f64),
            deletions: mean(&|m| m.revision_effort.deletions as f64),
            replacements: mean(&|m| m.revision_effort.replacements as f64),
            total_edits: mean(&|m| m.revision_effort.total_edits as f64),
        },
        fre: mean(&|m| m.revised.fre),
        fk_grade: mean(&|m| m.revised.fk_grade),
        avg_sentence_len: mean(&|m| m.revised.avg_sentence_len),
        ttr: mean(&|m| m.revised.ttr),
        original_fre: mean(&|m| m.original.fre),
        original_fk_grade: mean(&|m| m.original.fk_grade),
        original_avg_sentence_len: mean(&|m| m.original.avg_sentence_len),
        original_ttr: mean(&|m| m.original.ttr),
        semantic_diversity: (diversities.len() == metrics.len())
            .then(|| diversities.iter().sum::<f64>() / n),
        eqf: None,
        tone_scores: None,
    })
}

/// Plain-text classification report: one row per class, then accuracy,
/// macro and weighted averages.
pub fn tone_report_table(scores: &ToneScores) -> String {
    let width = scores.per_class.iter().map(|c| c.label.len()).max().unwrap_or(0).max(12);
    let mut out = format!("{:<width$} {:>9} {:>9} {:>9} {:>9}\n", "", "precision", "recall", "f1-score", "support");
    for c in &scores.per_class {
        out += &format!(
            "{:<width$} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
            c.label, c.precision, c.recall, c.f1, c.support
        );
    }
    let k = scores.per_class.len() as f64;
    let total = scores.total as f64;
    let macro_p = scores.per_class.iter().map(|c| c.precision).sum::<f64>() / k;
    let macro_r = scores.per_class.iter().map(|c| c.recall).sum::<f64>() / k;
    let w_p = scores.per_class.iter().map(|c| c.precision * c.support as f64).sum::<f64>() / total;
    let w_r = scores.per_class.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / total;
    out += "\n";
    out += &format!("{:<width$} {:>9} {:>9} {:>9.3} {:>9}\n", "accuracy", "", "", scores.accuracy, scores.total);
    out += &format!(
        "{:<width$} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
        "macro avg", macro_p, macro_r, scores.macro_f1, scores.total
    );
    out += &format!(
        "{:<width$} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
        "weighted avg", w_p, w_r, scores.weighted_f1, scores.total
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_metrics_collapse_whitespace() {
        let pair = DraftPair {
            original: "hello   world.".into(),
            revised: "hello there world.".into(),
            task: TaskKind::Write,
            tool_tag: "t".into(),
        };
        let m = pair_metrics(&pair, CountMode::Span, None).unwrap();
        assert_eq!(m.revision_effort.insertions, 1);
        let report = summarize(&[m]).unwrap();
        assert_eq!(report.count, 1);
        assert!(report.semantic_diversity.is_none());
    }

    #[test]
    fn table_has_footer_rows() {
        let s = tone_eval(&["a", "b"], &["a", "b"]).unwrap();
        let table = tone_report_table(&s);
        assert!(table.contains("accuracy") && table.contains("macro avg") && table.contains("weighted avg"));
    }
}
