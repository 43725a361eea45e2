//! Scripted, deterministic stand-ins for every capability.
//!
//! A script is JSONL, one `{"capability", "match", "response"}` object per
//! line. An integer `match` answers exactly that call (0-based, counted per
//! capability; transcription uses the utterance index instead). A string
//! `match` answers any call whose prompt contains it. Lines sharing the same
//! substring form a group served in file order, the last line repeating once
//! the group runs out. Index matches win over substring matches, and the
//! first group in file order wins among substrings. An optional
//! `"fail": true` makes the call fail as a transport error.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use parking_lot::Mutex;
use serde::Deserialize;

use super::{Capability, TemplateId, ChatModel, Embedder, ProviderError, Synthesizer, Transcriber};
use crate::segment::{AudioRef, SAMPLE_RATE_HZ};
use crate::text::normalize;

pub const EMBEDDING_DIM: usize = 64;
/// Mock speech length per input character.
pub const MOCK_MS_PER_CHAR: u64 = 50;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Matcher {
    Index(u64),
    Substring(String),
}

#[derive(Debug, Clone, Deserialize)]
struct ScriptLine {
    capability: Capability,
    #[serde(rename = "match")]
    matcher: Matcher,
    #[serde(default)]
    response: String,
    #[serde(default)]
    fail: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    response: String,
    fail: bool,
}

#[derive(Debug, Clone, Default)]
struct CapabilityScript {
    by_index: BTreeMap<u64, Entry>,
    groups: Vec<(String, Vec<Entry>)>,
}

/// A parsed mock script. Cheap to clone; each [`MockProvider`] built from it
/// keeps its own call counters.
#[derive(Debug, Clone, Default)]
pub struct MockScript {
    per_capability: HashMap<Capability, CapabilityScript>,
}

impl MockScript {
    pub fn parse(jsonl: &str) -> Result<Self, ProviderError> {
        let mut script = Self::default();
        for (n, line) in jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ScriptLine = serde_json::from_str(line).map_err(|e| ProviderError::Script {
                line: n + 1,
                message: e.to_string(),
            })?;
            script.push(parsed);
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Script {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn push(&mut self, line: ScriptLine) {
        let entry = Entry { response: line.response, fail: line.fail };
        let cap = self.per_capability.entry(line.capability).or_default();
        match line.matcher {
            Matcher::Index(i) => {
                cap.by_index.insert(i, entry);
            }
            Matcher::Substring(s) => match cap.groups.iter_mut().find(|(k, _)| *k == s) {
                Some((_, entries)) => entries.push(entry),
                None => cap.groups.push((s, vec![entry])),
            },
        }
    }

    /// Appends a chat response matched by substring.
    pub fn chat(mut self, substring: &str, response: &str) -> Self {
        self.push(ScriptLine {
            capability: Capability::Chat,
            matcher: Matcher::Substring(substring.to_owned()),
            response: response.to_owned(),
            fail: false,
        });
        self
    }

    /// Appends a chat response for one exact call index.
    pub fn chat_at(mut self, index: u64, response: &str) -> Self {
        self.push(ScriptLine {
            capability: Capability::Chat,
            matcher: Matcher::Index(index),
            response: response.to_owned(),
            fail: false,
        });
        self
    }

    pub fn transcript(mut self, utterance: u64, text: &str) -> Self {
        self.push(ScriptLine {
            capability: Capability::Transcribe,
            matcher: Matcher::Index(utterance),
            response: text.to_owned(),
            fail: false,
        });
        self
    }

    /// Makes the given call of `capability` fail with a transport error.
    pub fn fail_at(mut self, capability: Capability, index: u64) -> Self {
        self.push(ScriptLine {
            capability,
            matcher: Matcher::Index(index),
            response: String::new(),
            fail: true,
        });
        self
    }
}

#[derive(Debug, Default)]
struct MockState {
    calls: HashMap<Capability, u64>,
    cursors: HashMap<(Capability, usize), usize>,
}

/// Mock backend for all four capabilities. Call counters are guarded so a
/// session can share one instance across its components.
#[derive(Debug)]
pub struct MockProvider {
    script: MockScript,
    state: Mutex<MockState>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        Self { script, state: Mutex::new(MockState::default()) }
    }

    /// Number of calls made so far to `capability`.
    pub fn calls(&self, capability: Capability) -> u64 {
        self.state.lock().calls.get(&capability).copied().unwrap_or(0)
    }

    fn lookup(&self, capability: Capability, index: Option<u64>, prompt: &str) -> Option<Entry> {
        let mut state = self.state.lock();
        let counter = state.calls.entry(capability).or_insert(0);
        let call = *counter;
        *counter += 1;
        let script = self.script.per_capability.get(&capability)?;
        if let Some(entry) = script.by_index.get(&index.unwrap_or(call)) {
            return Some(entry.clone());
        }
        let (group, (_, entries)) = script
            .groups
            .iter()
            .enumerate()
            .find(|(_, (needle, _))| prompt.contains(needle.as_str()))?;
        let cursor = state.cursors.entry((capability, group)).or_insert(0);
        let entry = entries[(*cursor).min(entries.len() - 1)].clone();
        *cursor += 1;
        Some(entry)
    }

    fn fail(capability: Capability, entry: &Option<Entry>) -> Result<(), ProviderError> {
        match entry {
            Some(e) if e.fail => Err(ProviderError::Transport {
                capability,
                message: "scripted failure".into(),
            }),
            _ => Ok(()),
        }
    }
}

impl ChatModel for MockProvider {
    fn complete(&self, _template: TemplateId, prompt: &str) -> Result<String, ProviderError> {
        let entry = self.lookup(Capability::Chat, None, prompt);
        Self::fail(Capability::Chat, &entry)?;
        entry.map(|e| e.response).ok_or_else(|| ProviderError::Unavailable {
            capability: Capability::Chat,
            message: "mock script has no response for this prompt".into(),
        })
    }
}

impl Transcriber for MockProvider {
    fn transcribe(&self, audio: &AudioRef) -> Result<String, ProviderError> {
        let entry = self.lookup(Capability::Transcribe, Some(audio.index), "");
        Self::fail(Capability::Transcribe, &entry)?;
        entry.map(|e| e.response).ok_or_else(|| ProviderError::Unavailable {
            capability: Capability::Transcribe,
            message: format!("mock script has no transcript for utterance {}", audio.index),
        })
    }
}

impl Synthesizer for MockProvider {
    fn synthesize(&self, text: &str, voice: &str) -> Result<Vec<u8>, ProviderError> {
        let entry = self.lookup(Capability::Synthesize, None, text);
        Self::fail(Capability::Synthesize, &entry)?;
        Ok(mock_speech(text, voice))
    }
}

impl Embedder for MockProvider {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let entry = self.lookup(Capability::Embed, None, text);
        Self::fail(Capability::Embed, &entry)?;
        hashed_embedding(text)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bucket a token lands in for the hashed bag-of-words embedding.
pub fn embedding_bucket(token: &str) -> usize {
    (fnv1a(token.as_bytes()) % EMBEDDING_DIM as u64) as usize
}

/// Unit-length hashed bag-of-words vector over normalized tokens.
pub fn hashed_embedding(text: &str) -> Result<Vec<f64>, ProviderError> {
    let tokens = normalize(text);
    if tokens.is_empty() {
        return Err(ProviderError::EmptyInput("embed"));
    }
    let mut v = vec![0.0; EMBEDDING_DIM];
    for t in &tokens {
        v[embedding_bucket(t)] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// A WAV clip whose length is proportional to the character count; the
/// pitch depends on the voice so different voices give different bytes.
pub fn mock_speech(text: &str, voice: &str) -> Vec<u8> {
    let samples_per_char = SAMPLE_RATE_HZ as u64 * MOCK_MS_PER_CHAR / 1000;
    let n = text.chars().count() as u64 * samples_per_char;
    let freq = 220.0 + (fnv1a(voice.as_bytes()) % 440) as f64;
    let samples: Vec<i16> = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(SAMPLE_RATE_HZ);
            ((2.0 * std::f64::consts::PI * freq * t).sin() * 8000.0) as i16
        })
        .collect();
    wav_bytes(&samples)
}

/// 16-bit mono PCM WAV at the service sample rate.
pub fn wav_bytes(samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE_HZ.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE_HZ * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Duration in milliseconds of a WAV produced by [`wav_bytes`].
pub fn wav_duration_ms(bytes: &[u8]) -> u64 {
    let data = bytes.len().saturating_sub(44) as u64;
    data / 2 * 1000 / u64::from(SAMPLE_RATE_HZ)
}
