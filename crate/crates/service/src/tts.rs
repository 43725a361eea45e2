//! Synthesized-speech cache and playback bookkeeping.
//!
//! Entries are keyed by `sha256(voice || 0x00 || text)` and evicted least
//! recently used first once the byte budget is exceeded. The cache is
//! shared by every session on a server.

use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_BUDGET_BYTES: usize = 64 * 1024 * 1024;

pub fn cache_key(text: &str, voice: &str) -> String {
    let mut h = Sha256::new();
    h.update(voice.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtsCacheEntry {
    pub key: String,
    pub audio: Arc<Vec<u8>>,
    pub created_at: u64,
    pub hit_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: usize,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Default)]
struct Inner {
    entries: IndexMap<String, TtsCacheEntry>,
    bytes: usize,
    hits: u64,
    misses: u64,
}

#[derive(Debug)]
pub struct TtsCache {
    inner: Mutex<Inner>,
    budget: usize,
}

impl Default for TtsCache {
    fn default() -> Self {
        Self::new(DEFAULT_BUDGET_BYTES)
    }
}

impl TtsCache {
    pub fn new(budget_bytes: usize) -> Self {
        Self { inner: Mutex::new(Inner::default()), budget: budget_bytes }
    }

    /// Looks the key up, marking it most recently used.
    pub fn get(&self, key: &str) -> Option<TtsCacheEntry> {
        let mut inner = self.inner.lock();
        let idx = inner.entries.get_index_of(key)?;
        let last = inner.entries.len() - 1;
        inner.entries.move_index(idx, last);
        inner.hits += 1;
        let entry = &mut inner.entries[last];
        entry.hit_count += 1;
        Some(entry.clone())
    }

    /// Returns the cached audio for `(text, voice)`, synthesizing it on a
    /// miss. The flag is true on a hit. Synthesis runs without the lock;
    /// if another caller stored the same key meanwhile, its bytes win so
    /// every caller sees identical audio.
    pub fn get_or_synthesize<E>(
        &self,
        text: &str,
        voice: &str,
        now_ms: u64,
        synthesize: impl FnOnce() -> Result<Vec<u8>, E>,
    ) -> Result<(TtsCacheEntry, bool), E> {
        let key = cache_key(text, voice);
        if let Some(entry) = self.get(&key) {
            return Ok((entry, true));
        }
        let audio = synthesize()?;
        let mut inner = self.inner.lock();
        if let Some(existing) = inner.entries.get(&key) {
            return Ok((existing.clone(), true));
        }
        inner.misses += 1;
        let entry = TtsCacheEntry { key: key.clone(), audio: Arc::new(audio), created_at: now_ms, hit_count: 0 };
        inner.bytes += entry.audio.len();
        inner.entries.insert(key, entry.clone());
        while inner.bytes > self.budget && inner.entries.len() > 1 {
            if let Some((_, evicted)) = inner.entries.shift_remove_index(0) {
                inner.bytes -= evicted.audio.len();
            }
        }
        Ok((entry, false))
    }

    /// Peeks without touching recency or counters.
    pub fn peek(&self, key: &str) -> Option<TtsCacheEntry> {
        self.inner.lock().entries.get(key).cloned()
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.lock();
        CacheStats { entries: inner.entries.len(), bytes: inner.bytes, hits: inner.hits, misses: inner.misses }
    }

    /// Keys from least to most recently used.
    pub fn keys(&self) -> Vec<String> {
        self.inner.lock().entries.keys().cloned().collect()
    }
}

/// Audio currently being played to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Playback {
    pub key: String,
    pub text: String,
    pub started_at: u64,
    pub ends_at: u64,
    /// Speech detected before this instant interrupts the playback.
    pub armed_until: u64,
}

impl Playback {
    pub fn new(key: String, text: String, started_at: u64, duration_ms: u64, interruption_window_ms: u64) -> Self {
        let ends_at = started_at + duration_ms;
        Self { key, text, started_at, ends_at, armed_until: ends_at.max(started_at + interruption_window_ms) }
    }

    pub fn is_armed(&self, now_ms: u64) -> bool {
        now_ms < self.armed_until
    }
}
