//! Per-class precision/recall/F1 with accuracy, macro and weighted F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("no labeled items")]
    Empty,
    #[error("{gold} gold labels but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneScores {
    /// One row per label seen in either gold or predictions, sorted by label.
    pub per_class: Vec<ClassScore>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub total: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predictions against gold labels. Empty denominators give 0.
pub fn tone_eval<S: AsRef<str>>(gold: &[S], predicted: &[S]) -> Result<ToneScores, ClassifyError> {
    if gold.len() != predicted.len() {
        return Err(ClassifyError::LengthMismatch { gold: gold.len(), predicted: predicted.len() });
    }
    if gold.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let labels: BTreeSet<&str> = gold.iter().chain(predicted).map(AsRef::as_ref).collect();
    // (true positives, predicted count, gold count)
    let mut tally: BTreeMap<&str, (usize, usize, usize)> = labels.iter().map(|l| (*l, (0, 0, 0))).collect();
    let mut correct = 0;
    for (g, p) in gold.iter().zip(predicted) {
        let (g, p) = (g.as_ref(), p.as_ref());
        tally.get_mut(p).expect("label present").1 += 1;
        tally.get_mut(g).expect("label present").2 += 1;
        if g == p {
            correct += 1;
            tally.get_mut(g).expect("label present").0 += 1;
        }
    }
    let per_class: Vec<ClassScore> = tally
        .into_iter()
        .map(|(label, (tp, pred, support))| {
            let precision = ratio(tp, pred);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassScore { label: label.to_owned(), precision, recall, f1, support }
        })
        .collect();
    let total = gold.len();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64;
    Ok(ToneScores { per_class, accuracy: ratio(correct, total), macro_f1, weighted_f1, total })
}
