//! Voice macro recognition.
//!
//! Transcripts are checked for commands before they reach the question
//! engine. A registry phrase found verbatim (as contiguous normalized tokens)
//! matches with score 1.0. Otherwise a window of the phrase's token length
//! (±1) slides over the transcript and each window is scored with the cosine
//! similarity of character-trigram count vectors. Windows one token longer
//! than the phrase are also scored with one interior token elided, which is
//! what lets "please skip this question" resolve to `skip_question`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("empty phrase")]
    EmptyPhrase,
    #[error("phrase already bound: {phrase:?} is used by {existing}")]
    PhraseAlreadyBound { phrase: String, existing: CommandId },
    #[error("unknown command id {0:?}")]
    UnknownCommand(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid registry document: {0}")]
    Document(#[from] serde_json::Error),
    #[error("reading registry: {0}")]
    Io(#[from] std::io::Error),
}

/// Built-in command set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandId {
    ModifyAnswer,
    PauseWriting,
    GoToEditor,
    PlayThatAgain,
    SkipQuestion,
    NextQuestion,
    PreviousQuestion,
    ContinueWriting,
    FinishWriting,
    ReturnToQuestions,
    StopSpeaking,
}

impl CommandId {
    pub const ALL: [CommandId; 11] = [
        CommandId::ModifyAnswer,
        CommandId::PauseWriting,
        CommandId::GoToEditor,
        CommandId::PlayThatAgain,
        CommandId::SkipQuestion,
        CommandId::NextQuestion,
        CommandId::PreviousQuestion,
        CommandId::ContinueWriting,
        CommandId::FinishWriting,
        CommandId::ReturnToQuestions,
        CommandId::StopSpeaking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandId::ModifyAnswer => "modify_answer",
            CommandId::PauseWriting => "pause_writing",
            CommandId::GoToEditor => "go_to_editor",
            CommandId::PlayThatAgain => "play_that_again",
            CommandId::SkipQuestion => "skip_question",
            CommandId::NextQuestion => "next_question",
            CommandId::PreviousQuestion => "previous_question",
            CommandId::ContinueWriting => "continue_writing",
            CommandId::FinishWriting => "finish_writing",
            CommandId::ReturnToQuestions => "return_to_questions",
            CommandId::StopSpeaking => "stop_speaking",
        }
    }

    /// The spoken phrase shipped for this command.
    pub fn builtin_phrase(self) -> &'static str {
        match self {
            CommandId::ModifyAnswer => "modify answer",
            CommandId::PauseWriting => "pause writing",
            CommandId::GoToEditor => "go to editor",
            CommandId::PlayThatAgain => "play that again",
            CommandId::SkipQuestion => "skip question",
            CommandId::NextQuestion => "next question",
            CommandId::PreviousQuestion => "previous question",
            CommandId::ContinueWriting => "continue writing",
            CommandId::FinishWriting => "finish writing",
            CommandId::ReturnToQuestions => "return to questions",
            CommandId::StopSpeaking => "stop speaking",
        }
    }
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandId {
    type Err = CommandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommandId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| CommandError::UnknownCommand(s.to_owned()))
    }
}

/// Character-trigram count vector of a token sequence.
#[derive(Debug, Clone, PartialEq)]
struct TrigramProfile {
    counts: HashMap<[char; 3], u32>,
    norm: f64,
}

impl TrigramProfile {
    fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut padded = vec![' '];
        for (i, token) in tokens.iter().enumerate() {
            if i > 0 {
                padded.push(' ');
            }
            padded.extend(token.as_ref().chars());
        }
        padded.push(' ');

        let mut counts = HashMap::new();
        for window in padded.windows(3) {
            *counts.entry([window[0], window[1], window[2]]).or_insert(0) += 1;
        }
        let norm = counts
            .values()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt();
        Self { counts, norm }
    }

    fn cosine(&self, other: &Self) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        let dot: f64 = small
            .counts
            .iter()
            .filter_map(|(gram, &c)| large.counts.get(gram).map(|&d| f64::from(c) * f64::from(d)))
            .sum();
        (dot / (self.norm * other.norm)).clamp(0.0, 1.0)
    }
}

/// Cosine similarity of the character-trigram vectors of two phrases.
///
/// Tokens are joined with single spaces and padded with one space on each
/// side before trigrams are taken, so word boundaries contribute grams.
pub fn similarity<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> Result<f64, CommandError> {
    if a.is_empty() || b.is_empty() {
        return Err(CommandError::EmptyPhrase);
    }
    Ok(TrigramProfile::new(a).cosine(&TrigramProfile::new(b)))
}

#[derive(Debug, Clone)]
struct Phrase {
    text: String,
    tokens: Vec<String>,
    profile: TrigramProfile,
}

impl Phrase {
    fn parse(raw: &str) -> Result<Self, CommandError> {
        let tokens = normalize(raw);
        if tokens.is_empty() {
            return Err(CommandError::EmptyPhrase);
        }
        Ok(Self {
            text: tokens.join(" "),
            profile: TrigramProfile::new(&tokens),
            tokens,
        })
    }
}

/// Recognized command within a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMatch {
    pub command_id: CommandId,
    /// Half-open token range `[start, end)` into the normalized transcript.
    pub matched_span: (usize, usize),
    pub score: f64,
    pub phrase: String,
}

/// Immutable phrase table. Registering a macro yields a new registry.
#[derive(Debug, Clone)]
pub struct CommandRegistry {
    entries: BTreeMap<CommandId, Vec<Phrase>>,
    threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryDocument {
    threshold: f64,
    commands: BTreeMap<String, Vec<String>>,
}

impl Default for CommandRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl CommandRegistry {
    /// The eleven shipped commands at the default threshold.
    pub fn builtin() -> Self {
        let entries = CommandId::ALL
            .into_iter()
            .map(|id| (id, vec![Phrase::parse(id.builtin_phrase()).expect("builtin phrase")]))
            .collect();
        Self { entries, threshold: DEFAULT_THRESHOLD }
    }

    /// Builds a registry from `(command, phrases)` pairs, validating every
    /// invariant.
    pub fn new<I, P>(threshold: f64, commands: I) -> Result<Self, CommandError>
    where
        I: IntoIterator<Item = (CommandId, P)>,
        P: IntoIterator,
        P::Item: AsRef<str>,
    {
        let mut registry = Self { entries: BTreeMap::new(), threshold: DEFAULT_THRESHOLD };
        registry.set_threshold(threshold)?;
        for (id, phrases) in commands {
            registry.entries.entry(id).or_default();
            for phrase in phrases {
                registry.insert(id, phrase.as_ref())?;
            }
        }
        Ok(registry)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, CommandError> {
        let mut next = self.clone();
        next.set_threshold(threshold)?;
        Ok(next)
    }

    fn set_threshold(&mut self, threshold: f64) -> Result<(), CommandError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(CommandError::InvalidThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(())
    }

    /// Normalized phrases bound to `id`.
    pub fn phrases(&self, id: CommandId) -> Vec<&str> {
        self.entries
            .get(&id)
            .map(|list| list.iter().map(|p| p.text.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn commands(&self) -> impl Iterator<Item = (CommandId, Vec<&str>)> + '_ {
        self.entries
            .iter()
            .map(|(id, list)| (*id, list.iter().map(|p| p.text.as_str()).collect()))
    }

    fn owner_of(&self, text: &str) -> Option<CommandId> {
        self.entries
            .iter()
            .find(|(_, list)| list.iter().any(|p| p.text == text))
            .map(|(id, _)| *id)
    }

    fn insert(&mut self, id: CommandId, raw: &str) -> Result<(), CommandError> {
        let phrase = Phrase::parse(raw)?;
        match self.owner_of(&phrase.text) {
            Some(existing) if existing == id => Ok(()),
            Some(existing) => Err(CommandError::PhraseAlreadyBound { phrase: phrase.text, existing }),
            None => {
                self.entries.entry(id).or_default().push(phrase);
                Ok(())
            }
        }
    }

    /// Binds a user macro to a command. Rebinding the same phrase to the same
    /// command is a no-op; binding it to a different command fails.
    pub fn register_macro(&self, command_id: &str, phrase: &str) -> Result<Self, CommandError> {
        let id: CommandId = command_id.parse()?;
        let mut next = self.clone();
        next.insert(id, phrase)?;
        Ok(next)
    }

    pub fn from_json(json: &str) -> Result<Self, CommandError> {
        let doc: RegistryDocument = serde_json::from_str(json)?;
        let mut commands = Vec::with_capacity(doc.commands.len());
        for (name, phrases) in doc.commands {
            commands.push((name.parse::<CommandId>()?, phrases));
        }
        Self::new(doc.threshold, commands)
    }

    pub fn load(path: &Path) -> Result<Self, CommandError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let doc = RegistryDocument {
            threshold: self.threshold,
            commands: self
                .entries
                .iter()
                .map(|(id, list)| (id.as_str().to_owned(), list.iter().map(|p| p.text.clone()).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }

    /// Finds the command spoken in `transcript`, if any.
    ///
    /// Exact containment wins outright. Among fuzzy candidates the highest
    /// score wins; ties go to the longest phrase, then the earliest span.
    pub fn recognize(&self, transcript: &str) -> Option<CommandMatch> {
        let tokens = normalize(transcript);
        if tokens.is_empty() {
            return None;
        }
        self.exact_match(&tokens).or_else(|| {
            self.fuzzy_match(&tokens)
                .filter(|candidate| candidate.score >= self.threshold)
        })
    }

    fn exact_match(&self, tokens: &[String]) -> Option<CommandMatch> {
        let mut best: Option<(Candidate, CommandMatch)> = None;
        for (id, phrase) in self.iter_phrases() {
            let m = phrase.tokens.len();
            if m > tokens.len() {
                continue;
            }
            if let Some(start) = tokens.windows(m).position(|w| w == phrase.tokens.as_slice()) {
                let candidate = Candidate::new(1.0, phrase, start);
                if best.as_ref().is_none_or(|(b, _)| candidate.beats(b)) {
                    let found = CommandMatch {
                        command_id: id,
                        matched_span: (start, start + m),
                        score: 1.0,
                        phrase: phrase.text.clone(),
                    };
                    best = Some((candidate, found));
                }
            }
        }
        best.map(|(_, m)| m)
    }

    fn fuzzy_match(&self, tokens: &[String]) -> Option<CommandMatch> {
        let mut best: Option<(Candidate, CommandMatch)> = None;
        for (id, phrase) in self.iter_phrases() {
            let m = phrase.tokens.len();
            for width in m.saturating_sub(1).max(1)..=m + 1 {
                if width > tokens.len() {
                    break;
                }
                for start in 0..=tokens.len() - width {
                    let window = &tokens[start..start + width];
                    let score = window_score(phrase, window, width == m + 1);
                    let candidate = Candidate::new(score, phrase, start);
                    if best.as_ref().is_none_or(|(b, _)| candidate.beats(b)) {
                        let found = CommandMatch {
                            command_id: id,
                            matched_span: (start, start + width),
                            score,
                            phrase: phrase.text.clone(),
                        };
                        best = Some((candidate, found));
                    }
                }
            }
        }
        best.map(|(_, m)| m)
    }

    fn iter_phrases(&self) -> impl Iterator<Item = (CommandId, &Phrase)> {
        self.entries
            .iter()
            .flat_map(|(id, list)| list.iter().map(move |p| (*id, p)))
    }
}

fn window_score(phrase: &Phrase, window: &[String], allow_elision: bool) -> f64 {
    let mut score = phrase.profile.cosine(&TrigramProfile::new(window));
    if allow_elision && window.len() >= 3 {
        for skip in 1..window.len() - 1 {
            let elided: Vec<&String> = window
                .iter()
                .enumerate()
                .filter_map(|(i, t)| (i != skip).then_some(t))
                .collect();
            score = score.max(phrase.profile.cosine(&TrigramProfile::new(&elided)));
        }
    }
    score
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    phrase_tokens: usize,
    phrase_chars: usize,
    start: usize,
}

impl Candidate {
    fn new(score: f64, phrase: &Phrase, start: usize) -> Self {
        Self {
            score,
            phrase_tokens: phrase.tokens.len(),
            phrase_chars: phrase.text.len(),
            start,
        }
    }

    /// Strict ordering: earlier-seen candidates win remaining ties, which
    /// keeps the choice deterministic in registry order.
    fn beats(&self, other: &Self) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        if self.phrase_tokens != other.phrase_tokens {
            return self.phrase_tokens > other.phrase_tokens;
        }
        if self.phrase_chars != other.phrase_chars {
            return self.phrase_chars > other.phrase_chars;
        }
        self.start < other.start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        normalize(s)
    }

    #[test]
    fn builtin_phrases_have_two_or_more_tokens() {
        let registry = CommandRegistry::builtin();
        for (id, phrases) in registry.commands() {
            assert_eq!(phrases.len(), 1, "{id}");
            for phrase in phrases {
                assert!(phrase.split(' ').count() >= 2, "{phrase}");
            }
        }
        assert_eq!(registry.commands().count(), 11);
    }

    #[test]
    fn similarity_identity_and_errors() {
        let s = similarity(&toks("skip question"), &toks("skip question")).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(matches!(similarity::<String, String>(&[], &toks("a")), Err(CommandError::EmptyPhrase)));
    }

    #[test]
    fn similarity_is_symmetric() {
        let a = toks("skip question");
        let b = toks("question skip");
        assert_eq!(similarity(&a, &b).unwrap(), similarity(&b, &a).unwrap());
    }

    #[test]
    fn exact_phrase_scores_one() {
        let m = CommandRegistry::builtin().recognize("skip question").unwrap();
        assert_eq!(m.command_id, CommandId::SkipQuestion);
        assert_eq!(m.score, 1.0);
        assert_eq!(m.matched_span, (0, 2));
    }

    #[test]
    fn filler_word_is_tolerated() {
        let m = CommandRegistry::builtin().recognize("please skip this question").unwrap();
        assert_eq!(m.command_id, CommandId::SkipQuestion);
        assert!(m.score >= 0.85);
        assert_eq!(m.matched_span, (1, 4));
    }

    #[test]
    fn ordinary_answer_is_not_a_command() {
        let registry = CommandRegistry::builtin();
        assert_eq!(registry.recognize("I want to invite my friends to the museum"), None);
        assert_eq!(registry.recognize(""), None);
    }

    #[test]
    fn longest_phrase_wins_exact_ties() {
        let registry = CommandRegistry::builtin()
            .register_macro("finish_writing", "stop")
            .unwrap();
        let m = registry.recognize("stop speaking").unwrap();
        assert_eq!(m.command_id, CommandId::StopSpeaking);
    }

    #[test]
    fn macro_registration() {
        let registry = CommandRegistry::builtin()
            .register_macro("finish_writing", "that's enough")
            .unwrap();
        let m = registry.recognize("ok that's enough").unwrap();
        assert_eq!(m.command_id, CommandId::FinishWriting);
        assert_eq!(m.phrase, "thats enough");

        let again = registry.register_macro("finish_writing", "That's enough!").unwrap();
        assert_eq!(again.phrases(CommandId::FinishWriting).len(), 2);

        assert!(matches!(
            registry.register_macro("skip_question", "that's enough"),
            Err(CommandError::PhraseAlreadyBound { existing: CommandId::FinishWriting, .. })
        ));
        assert!(matches!(
            registry.register_macro("launch_rockets", "go now"),
            Err(CommandError::UnknownCommand(_))
        ));
        assert!(matches!(registry.register_macro("skip_question", "?!"), Err(CommandError::EmptyPhrase)));
    }

    #[test]
    fn construction_rejects_bad_threshold_and_duplicates() {
        assert!(matches!(
            CommandRegistry::new(1.5, [(CommandId::SkipQuestion, ["skip question"])]),
            Err(CommandError::InvalidThreshold(_))
        ));
        assert!(matches!(
            CommandRegistry::new(
                0.85,
                [(CommandId::SkipQuestion, ["skip it"]), (CommandId::NextQuestion, ["Skip it."])]
            ),
            Err(CommandError::PhraseAlreadyBound { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let registry = CommandRegistry::builtin()
            .register_macro("finish_writing", "stop now")
            .unwrap();
        let json = registry.to_json();
        let back = CommandRegistry::from_json(&json).unwrap();
        assert_eq!(back.threshold(), registry.threshold());
        for id in CommandId::ALL {
            assert_eq!(back.phrases(id), registry.phrases(id));
        }
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["commands"]["skip_question"][0], "skip question");
    }

    #[test]
    fn unknown_command_in_document_is_rejected() {
        let err = CommandRegistry::from_json(r#"{"threshold":0.85,"commands":{"fly":["take off"]}}"#);
        assert!(matches!(err, Err(CommandError::UnknownCommand(_))));
    }
}
