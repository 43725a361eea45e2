//! Essential Question Fraction: necessary over all issued questions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionLabel {
    Necessary,
    Unnecessary,
    Skipped,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no annotated questions")]
pub struct EmptyAnnotations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EqfCounts {
    pub necessary: usize,
    pub unnecessary: usize,
    pub skipped: usize,
}

impl EqfCounts {
    pub fn tally(labels: &[QuestionLabel]) -> Self {
        let mut c = Self::default();
        for l in labels {
            match l {
                QuestionLabel::Necessary => c.necessary += 1,
                QuestionLabel::Unnecessary => c.unnecessary += 1,
                QuestionLabel::Skipped => c.skipped += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.necessary + self.unnecessary + self.skipped
    }

    pub fn eqf(&self) -> Result<f64, EmptyAnnotations> {
        match self.total() {
            0 => Err(EmptyAnnotations),
            total => Ok(self.necessary as f64 / total as f64),
        }
    }
}

pub fn eqf(labels: &[QuestionLabel]) -> Result<f64, EmptyAnnotations> {
    EqfCounts::tally(labels).eqf()
}
