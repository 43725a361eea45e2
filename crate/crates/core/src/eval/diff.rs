//! Word-level revision effort via Ratcliff-Obershelp matching.
//!
//! The longest common contiguous block is found first (earliest in the
//! original on ties, then earliest in the revision), and the same search
//! recurses on the unmatched flanks. The matched blocks are turned into
//! equal/insert/delete/replace opcodes in the usual way.

use serde::{Deserialize, Serialize};

use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpTag {
    Equal,
    Insert,
    Delete,
    Replace,
}

/// `a[a_start..a_end]` becomes `b[b_start..b_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub tag: OpTag,
    pub a_start: usize,
    pub a_end: usize,
    pub b_start: usize,
    pub b_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// One edit per non-equal opcode span.
    #[default]
    Span,
    /// One edit per word: a replace of `la` words by `lb` words counts
    /// `min(la, lb)` replacements plus the surplus as insertions or deletions.
    PerWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub insertions: usize,
    pub deletions: usize,
    pub replacements: usize,
    pub total_edits: usize,
}

/// Matching block `(i, j, size)`: `a[i..i+size] == b[j..j+size]`.
pub type Block = (usize, usize, usize);

#[allow(clippy::needless_range_loop)]
fn longest_match<T: PartialEq>(a: &[T], b: &[T], alo: usize, ahi: usize, blo: usize, bhi: usize) -> Block {
    // run[j] = length of the common suffix ending at a[i-1], b[j-1].
    let mut best = (alo, blo, 0);
    let mut prev = vec![0usize; bhi - blo + 1];
    let mut cur = vec![0usize; bhi - blo + 1];
    for i in alo..ahi {
        for j in blo..bhi {
            let k = j - blo + 1;
            cur[k] = if a[i] == b[j] { prev[k - 1] + 1 } else { 0 };
            let size = cur[k];
            if size > best.2 {
                best = (i + 1 - size, j + 1 - size, size);
            } else if size == best.2 && size > 0 {
                let cand = (i + 1 - size, j + 1 - size);
                if cand < (best.0, best.1) {
                    best = (cand.0, cand.1, size);
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Matching blocks in order, adjacent blocks merged, without a sentinel.
pub fn matching_blocks<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_match(a, b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        blocks.push((i, j, k));
        stack.push((alo, i, blo, j));
        stack.push((i + k, ahi, j + k, bhi));
    }
    blocks.sort_unstable();

    let mut merged: Vec<Block> = Vec::with_capacity(blocks.len());
    for (i, j, k) in blocks {
        match merged.last_mut() {
            Some(last) if last.0 + last.2 == i && last.1 + last.2 == j => last.2 += k,
            _ => merged.push((i, j, k)),
        }
    }
    merged
}

pub fn opcodes<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Opcode> {
    let mut ops = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut blocks = matching_blocks(a, b);
    blocks.push((a.len(), b.len(), 0));
    for (ai, bj, size) in blocks {
        let tag = match (i < ai, j < bj) {
            (true, true) => Some(OpTag::Replace),
            (true, false) => Some(OpTag::Delete),
            (false, true) => Some(OpTag::Insert),
            (false, false) => None,
        };
        if let Some(tag) = tag {
            ops.push(Opcode { tag, a_start: i, a_end: ai, b_start: j, b_end: bj });
        }
        i = ai + size;
        j = bj + size;
        if size > 0 {
            ops.push(Opcode { tag: OpTag::Equal, a_start: ai, a_end: i, b_start: bj, b_end: j });
        }
    }
    ops
}

pub fn count_edits(ops: &[Opcode], mode: CountMode) -> EditCounts {
    let mut c = EditCounts::default();
    for op in ops {
        let (la, lb) = (op.a_end - op.a_start, op.b_end - op.b_start);
        match (mode, op.tag) {
            (_, OpTag::Equal) => {}
            (CountMode::Span, OpTag::Insert) => c.insertions += 1,
            (CountMode::Span, OpTag::Delete) => c.deletions += 1,
            (CountMode::Span, OpTag::Replace) => c.replacements += 1,
            (CountMode::PerWord, OpTag::Insert) => c.insertions += lb,
            (CountMode::PerWord, OpTag::Delete) => c.deletions += la,
            (CountMode::PerWord, OpTag::Replace) => {
                c.replacements += la.min(lb);
                c.insertions += lb.saturating_sub(la);
                c.deletions += la.saturating_sub(lb);
            }
        }
    }
    c.total_edits = c.insertions + c.deletions + c.replacements;
    c
}

/// Length of the insert/delete script the opcodes describe: a replace of
/// `la` words by `lb` words costs `la + lb`.
pub fn indel_cost(ops: &[Opcode]) -> usize {
    ops.iter()
        .filter(|op| op.tag != OpTag::Equal)
        .map(|op| (op.a_end - op.a_start) + (op.b_end - op.b_start))
        .sum()
}

pub fn word_diff_tokens<T: PartialEq>(a: &[T], b: &[T], mode: CountMode) -> EditCounts {
    count_edits(&opcodes(a, b), mode)
}

/// Span-mode edit counts between two texts after normalization.
pub fn word_diff(original: &str, revised: &str) -> EditCounts {
    word_diff_with(original, revised, CountMode::Span)
}

pub fn word_diff_with(original: &str, revised: &str, mode: CountMode) -> EditCounts {
    word_diff_tokens(&normalize(original), &normalize(revised), mode)
}
