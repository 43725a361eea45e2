//! Semantic diversity: one minus the cosine similarity of two embeddings.

use crate::provider::{cosine, Embedder, ProviderError};

/// In `[0, 2]`; identical embeddings give exactly 0.
pub fn semantic_diversity(a: &str, b: &str, embedder: &dyn Embedder) -> Result<f64, ProviderError> {
    for (name, text) in [("original", a), ("revised", b)] {
        if text.trim().is_empty() {
            tracing::debug!(side = name, "empty text passed to semantic_diversity");
            return Err(ProviderError::EmptyInput("embed"));
        }
    }
    let va = embedder.embed(a)?;
    let vb = embedder.embed(b)?;
    if va == vb {
        return Ok(0.0);
    }
    Ok((1.0 - cosine(&va, &vb)).clamp(0.0, 2.0))
}
