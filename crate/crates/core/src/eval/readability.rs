//! Flesch reading ease, Flesch-Kincaid grade, sentence length and TTR.
//!
//! Coefficients are the standard published ones. Syllables come from a
//! vowel-group heuristic; the unit tests pin its outputs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize, split_sentences};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadabilityError {
    #[error("text has no words")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextCounts {
    pub sentences: usize,
    pub words: usize,
    pub syllables: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityScores {
    pub fre: f64,
    pub fk_grade: f64,
    pub avg_sentence_len: f64,
    pub ttr: f64,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Syllable estimate for one normalized word.
///
/// Words of three letters or fewer count as one. Otherwise a silent final
/// `e` (but not consonant + `le`), a silent `ed` (unless after `t`/`d`) and
/// a silent `es` (unless after a sibilant) are dropped, then runs of vowels
/// (`y` included) are counted, with a floor of one.
pub fn syllables(word: &str) -> usize {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
    if letters.len() <= 3 {
        return 1;
    }
    let mut w: &[char] = &letters;
    let n = w.len();
    let ends = |suffix: &str| w.len() >= suffix.len() && w[w.len() - suffix.len()..].iter().copied().eq(suffix.chars());
    let silent_ed = ends("ed") && !matches!(w[n - 3], 't' | 'd');
    let silent_es =
        ends("es") && !matches!(w[n - 3], 's' | 'x' | 'z' | 'c' | 'g') && !(ends("hes") && matches!(w[n - 4], 'c' | 's'));
    if silent_ed || silent_es {
        w = &w[..n - 2];
    } else if ends("e") && !(ends("le") && !is_vowel(w[n - 3])) {
        w = &w[..n - 1];
    }
    let mut count = 0;
    let mut prev_vowel = false;
    for &c in w {
        let v = is_vowel(c);
        if v && !prev_vowel {
            count += 1;
        }
        prev_vowel = v;
    }
    count.max(1)
}

pub fn counts(text: &str) -> Result<TextCounts, ReadabilityError> {
    let words = normalize(text);
    if words.is_empty() {
        return Err(ReadabilityError::Empty);
    }
    let sentences = split_sentences(text).len().max(1);
    Ok(TextCounts {
        sentences,
        words: words.len(),
        syllables: words.iter().map(|w| syllables(w)).sum(),
    })
}

fn ratios(c: &TextCounts) -> (f64, f64) {
    (c.words as f64 / c.sentences as f64, c.syllables as f64 / c.words as f64)
}

pub fn flesch_reading_ease(text: &str) -> Result<f64, ReadabilityError> {
    let (wps, spw) = ratios(&counts(text)?);
    Ok(206.835 - 1.015 * wps - 84.6 * spw)
}

pub fn fk_grade(text: &str) -> Result<f64, ReadabilityError> {
    let (wps, spw) = ratios(&counts(text)?);
    Ok(0.39 * wps + 11.8 * spw - 15.59)
}

pub fn avg_sentence_length(text: &str) -> Result<f64, ReadabilityError> {
    Ok(ratios(&counts(text)?).0)
}

/// Unique normalized words over total words.
pub fn ttr(text: &str) -> Result<f64, ReadabilityError> {
    let words = normalize(text);
    if words.is_empty() {
        return Err(ReadabilityError::Empty);
    }
    let unique: HashSet<&String> = words.iter().collect();
    Ok(unique.len() as f64 / words.len() as f64)
}

pub fn scores(text: &str) -> Result<ReadabilityScores, ReadabilityError> {
    Ok(ReadabilityScores {
        fre: flesch_reading_ease(text)?,
        fk_grade: fk_grade(text)?,
        avg_sentence_len: avg_sentence_length(text)?,
        ttr: ttr(text)?,
    })
}
