//! Utterance segmentation over a stream of audio frames.
//!
//! Each frame is reduced to an RMS energy, the noise profile's floor is
//! subtracted and the remainder is compared against a sensitivity-derived
//! threshold. Speech runs shorter than `min_speech_ms` that start from
//! silence are reported as discarded noise. Once an utterance has started,
//! pauses shorter than the thinking window are treated as the speaker
//! thinking; a pause that reaches the window completes the utterance.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SAMPLE_RATE_HZ: u32 = 16_000;
pub const ADAPT_FLOOR_MS: u64 = 800;
pub const ADAPT_CEILING_MS: u64 = 4000;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("non-monotonic stream: frame at {got} ms after frame at {previous} ms")]
    NonMonotonic { previous: u64, got: u64 },
    #[error("invalid segmenter config: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed envelope line {line}: {message}")]
    Envelope { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseProfile {
    Quiet,
    Ambient,
    Custom(f64),
}

impl NoiseProfile {
    /// RMS floor removed from every frame before the speech decision.
    pub fn floor(self) -> f64 {
        match self {
            NoiseProfile::Quiet => 0.01,
            NoiseProfile::Ambient => 0.05,
            NoiseProfile::Custom(threshold) => threshold.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub thinking_window_ms: u64,
    pub min_speech_ms: u64,
    pub vad_sensitivity: f64,
    pub noise_profile: NoiseProfile,
    pub adaptive: bool,
    pub frame_ms: u64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            thinking_window_ms: 1500,
            min_speech_ms: 250,
            vad_sensitivity: 0.5,
            noise_profile: NoiseProfile::Quiet,
            adaptive: false,
            frame_ms: 20,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.frame_ms == 0 {
            return Err(SegmentError::InvalidConfig("frame_ms must be positive"));
        }
        if self.thinking_window_ms < self.frame_ms {
            return Err(SegmentError::InvalidConfig("thinking_window_ms shorter than one frame"));
        }
        if !(0.0..=1.0).contains(&self.vad_sensitivity) {
            return Err(SegmentError::InvalidConfig("vad_sensitivity outside [0, 1]"));
        }
        Ok(())
    }

    /// Energy above the noise floor needed to call a frame speech.
    pub fn speech_threshold(&self) -> f64 {
        0.1 * (1.0 - self.vad_sensitivity)
    }
}

/// Per-frame VAD decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameVerdict {
    pub is_speech: bool,
    pub energy: f64,
    pub timestamp_ms: u64,
}

/// Audio captured for one utterance. Energy-only fixtures produce an empty
/// sample buffer; `index` counts completed utterances in the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRef {
    pub index: u64,
    #[serde(skip)]
    pub samples: Arc<Vec<i16>>,
}

impl AudioRef {
    pub fn duration_ms(&self) -> u64 {
        self.samples.len() as u64 * 1000 / u64::from(SAMPLE_RATE_HZ)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceKind {
    SpeechStart,
    UtteranceComplete,
    DiscardedNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEvent {
    pub kind: UtteranceKind,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audio_ref: Option<AudioRef>,
}

/// One frame of input: either raw PCM or a precomputed envelope value.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame<'a> {
    Pcm { t_ms: u64, samples: &'a [i16] },
    Energy { t_ms: u64, energy: f64 },
}

impl Frame<'_> {
    fn t_ms(&self) -> u64 {
        match *self {
            Frame::Pcm { t_ms, .. } | Frame::Energy { t_ms, .. } => t_ms,
        }
    }
}

/// Offline fixture line: `{"t_ms": int, "energy": float}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t_ms: u64,
    pub energy: f64,
}

/// Parses an envelope JSONL fixture, skipping blank lines.
pub fn parse_envelope(jsonl: &str) -> Result<Vec<EnvelopePoint>, SegmentError> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| SegmentError::Envelope {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// RMS of 16-bit samples scaled to [0, 1].
pub fn rms_energy(samples: &[i16]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples
        .iter()
        .map(|&s| {
            let x = f64::from(s) / 32768.0;
            x * x
        })
        .sum();
    (sum / samples.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    Idle,
    /// Speech run that has not yet lasted `min_speech_ms`.
    Onset { start_ms: u64 },
    /// Utterance in progress; `silence_since` is set during a pause.
    Speaking { start_ms: u64, last_speech_end: u64, silence_since: Option<u64> },
}

/// Segmentation state for a single stream. Frames must be fed in timestamp
/// order; distinct streams use distinct segmenters.
#[derive(Debug, Clone)]
pub struct Segmenter {
    config: SegmenterConfig,
    phase: Phase,
    last_t: Option<u64>,
    buffer: Vec<i16>,
    utterances: u64,
    current_pauses: Vec<u64>,
    observed_pauses: Vec<u64>,
}

impl Segmenter {
    pub fn new(config: SegmenterConfig) -> Result<Self, SegmentError> {
        config.validate()?;
        Ok(Self {
            config,
            phase: Phase::Idle,
            last_t: None,
            buffer: Vec::new(),
            utterances: 0,
            current_pauses: Vec::new(),
            observed_pauses: Vec::new(),
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    pub fn thinking_window_ms(&self) -> u64 {
        self.config.thinking_window_ms
    }

    /// Intra-utterance pauses seen in completed utterances so far.
    pub fn observed_pauses(&self) -> &[u64] {
        &self.observed_pauses
    }

    pub fn is_in_utterance(&self) -> bool {
        matches!(self.phase, Phase::Speaking { .. })
    }

    pub fn classify(&self, frame: &Frame<'_>) -> FrameVerdict {
        let energy = match *frame {
            Frame::Pcm { samples, .. } => rms_energy(samples),
            Frame::Energy { energy, .. } => energy.max(0.0),
        };
        let filtered = (energy - self.config.noise_profile.floor()).max(0.0);
        FrameVerdict {
            is_speech: filtered > self.config.speech_threshold(),
            energy,
            timestamp_ms: frame.t_ms(),
        }
    }

    pub fn feed_energy(&mut self, t_ms: u64, energy: f64) -> Result<Vec<UtteranceEvent>, SegmentError> {
        self.feed_frame(Frame::Energy { t_ms, energy })
    }

    pub fn feed_pcm(&mut self, t_ms: u64, samples: &[i16]) -> Result<Vec<UtteranceEvent>, SegmentError> {
        self.feed_frame(Frame::Pcm { t_ms, samples })
    }

    /// Advances the state machine by one frame covering
    /// `[t_ms, t_ms + frame_ms)` and returns any events it produced.
    pub fn feed_frame(&mut self, frame: Frame<'_>) -> Result<Vec<UtteranceEvent>, SegmentError> {
        let t = frame.t_ms();
        if let Some(previous) = self.last_t {
            if t <= previous {
                return Err(SegmentError::NonMonotonic { previous, got: t });
            }
        }
        self.last_t = Some(t);

        let verdict = self.classify(&frame);
        let frame_end = t + self.config.frame_ms;
        let mut events = Vec::new();

        match (self.phase.clone(), verdict.is_speech) {
            (Phase::Idle, false) => {}
            (Phase::Idle, true) => {
                self.buffer.clear();
                self.current_pauses.clear();
                self.append_audio(&frame);
                self.phase = Phase::Onset { start_ms: t };
                self.promote_if_long_enough(t, frame_end, &mut events);
            }
            (Phase::Onset { start_ms }, true) => {
                self.append_audio(&frame);
                self.promote_if_long_enough(start_ms, frame_end, &mut events);
            }
            (Phase::Onset { start_ms }, false) => {
                events.push(UtteranceEvent {
                    kind: UtteranceKind::DiscardedNoise,
                    start_ms,
                    end_ms: t,
                    audio_ref: None,
                });
                self.buffer.clear();
                self.phase = Phase::Idle;
            }
            (Phase::Speaking { start_ms, silence_since, .. }, true) => {
                if let Some(since) = silence_since {
                    self.current_pauses.push(t - since);
                }
                self.append_audio(&frame);
                self.phase = Phase::Speaking { start_ms, last_speech_end: frame_end, silence_since: None };
            }
            (Phase::Speaking { start_ms, last_speech_end, silence_since }, false) => {
                self.append_audio(&frame);
                let since = silence_since.unwrap_or(t);
                if frame_end - since >= self.config.thinking_window_ms {
                    events.push(self.complete(start_ms, last_speech_end));
                } else {
                    self.phase = Phase::Speaking { start_ms, last_speech_end, silence_since: Some(since) };
                }
            }
        }
        Ok(events)
    }

    fn promote_if_long_enough(&mut self, start_ms: u64, frame_end: u64, events: &mut Vec<UtteranceEvent>) {
        if frame_end - start_ms >= self.config.min_speech_ms {
            events.push(UtteranceEvent {
                kind: UtteranceKind::SpeechStart,
                start_ms,
                end_ms: frame_end,
                audio_ref: None,
            });
            self.phase = Phase::Speaking { start_ms, last_speech_end: frame_end, silence_since: None };
        } else {
            self.phase = Phase::Onset { start_ms };
        }
    }

    fn complete(&mut self, start_ms: u64, end_ms: u64) -> UtteranceEvent {
        // Trailing pause audio is dropped.
        let keep = ((end_ms - start_ms) * u64::from(SAMPLE_RATE_HZ) / 1000) as usize;
        let mut samples = std::mem::take(&mut self.buffer);
        samples.truncate(keep);
        let audio_ref = AudioRef { index: self.utterances, samples: Arc::new(samples) };
        self.utterances += 1;
        self.observed_pauses.append(&mut self.current_pauses);
        self.phase = Phase::Idle;
        if self.config.adaptive {
            self.config.thinking_window_ms = adapt_window(self.config.thinking_window_ms, &self.observed_pauses);
        }
        UtteranceEvent {
            kind: UtteranceKind::UtteranceComplete,
            start_ms,
            end_ms,
            audio_ref: Some(audio_ref),
        }
    }

    fn append_audio(&mut self, frame: &Frame<'_>) {
        if let Frame::Pcm { samples, .. } = frame {
            self.buffer.extend_from_slice(samples);
        }
    }

    /// Recomputes the thinking window from the pauses observed so far.
    /// Has no effect unless the segmenter is adaptive.
    pub fn adapt(&mut self) -> u64 {
        if self.config.adaptive {
            self.config.thinking_window_ms = adapt_window(self.config.thinking_window_ms, &self.observed_pauses);
        }
        self.config.thinking_window_ms
    }
}

/// New thinking window from observed intra-utterance pauses: the
/// nearest-rank 95th percentile scaled by 1.25, clamped to [800, 4000] ms.
/// An empty list leaves the window unchanged.
pub fn adapt_window(current_ms: u64, pauses: &[u64]) -> u64 {
    if pauses.is_empty() {
        return current_ms;
    }
    let mut sorted = pauses.to_vec();
    sorted.sort_unstable();
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    let p95 = sorted[rank.clamp(1, sorted.len()) - 1] as f64;
    ((p95 * 1.25).round() as u64).clamp(ADAPT_FLOOR_MS, ADAPT_CEILING_MS)
}

/// Runs a whole envelope through a fresh segmenter.
pub fn segment_envelope(config: &SegmenterConfig, points: &[EnvelopePoint]) -> Result<Vec<UtteranceEvent>, SegmentError> {
    let mut segmenter = Segmenter::new(config.clone())?;
    let mut events = Vec::new();
    for p in points {
        events.extend(segmenter.feed_energy(p.t_ms, p.energy)?);
    }
    Ok(events)
}
