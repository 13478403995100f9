//! Greedy document chunking.
//!
//! The source text is packed left to right into chunks whose token count
//! never exceeds the budget, splitting at whitespace boundaries whenever
//! possible. Concatenating the chunks reproduces the input byte for byte.

use thiserror::Error;

use crate::tokens::TokenCounter;

#[derive(Debug, Error)]
pub enum ChunkError {
    #[error("chunk budget must be >= 1")]
    BadBudget,
    #[error("document has no countable tokens")]
    EmptyText,
    #[error("indivisible token at byte offset {offset} exceeds the chunk budget {budget}")]
    UnsplittableToken { offset: usize, budget: usize },
}

/// A document split into budget-bounded segments.
///
/// `K = chunks.len()` equals `ceil(c / budget)` for counters that are
/// additive across whitespace boundaries (the default whitespace counter is;
/// `c` is the whole document's token count). Counts are per-chunk recounts
/// with the same counter, each positive and within budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    pub chunks: Vec<String>,
    pub token_counts: Vec<usize>,
    pub budget: usize,
}

impl ChunkPlan {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Total tokens across chunks.
    pub fn total_tokens(&self) -> usize {
        self.token_counts.iter().sum()
    }

    /// The chunk count the linear-cost accounting predicts: `ceil(c / N)`.
    pub fn expected_chunk_count(total_tokens: usize, budget: usize) -> usize {
        total_tokens.div_ceil(budget)
    }
}

/// Split `text` into maximal chunks of at most `budget` tokens.
///
/// Chunks end at whitespace boundaries (each chunk carries the whitespace
/// that follows its last word) unless a single word alone exceeds the
/// budget, in which case the word is split at character granularity. A
/// single character that still exceeds the budget is unsplittable and
/// reported as a hard error with its byte offset.
pub fn chunk_document(
    text: &str,
    budget: usize,
    counter: &TokenCounter,
) -> Result<ChunkPlan, ChunkError> {
    if budget == 0 {
        return Err(ChunkError::BadBudget);
    }
    if counter.count(text) == 0 {
        return Err(ChunkError::EmptyText);
    }

    let mut chunks: Vec<String> = Vec::new();
    let mut token_counts: Vec<usize> = Vec::new();
    let mut current = String::new();
    let mut acc = counter.accumulator();

    for atom in atomize(text) {
        let mut probe = acc;
        counter.accumulate(&mut probe, atom.text);
        if counter.total(&probe) <= budget {
            current.push_str(atom.text);
            acc = probe;
            continue;
        }
        // The atom does not fit after what we have; close the chunk first.
        if !current.is_empty() {
            token_counts.push(counter.total(&acc));
            chunks.push(std::mem::take(&mut current));
        }
        acc = counter.accumulator();
        let alone = counter.count(atom.text);
        if alone <= budget {
            counter.accumulate(&mut acc, atom.text);
            current.push_str(atom.text);
            continue;
        }
        // A single word larger than the whole budget: split mid-word.
        let mut rest = atom.text;
        let mut rest_offset = atom.offset;
        while counter.count(rest) > budget {
            let cut = longest_char_prefix_within(rest, budget, counter);
            if cut == 0 {
                return Err(ChunkError::UnsplittableToken {
                    offset: rest_offset,
                    budget,
                });
            }
            token_counts.push(counter.count(&rest[..cut]));
            chunks.push(rest[..cut].to_string());
            rest = &rest[cut..];
            rest_offset += cut;
        }
        counter.accumulate(&mut acc, rest);
        current.push_str(rest);
    }
    if !current.is_empty() {
        token_counts.push(counter.total(&acc));
        chunks.push(current);
    }

    debug_assert_eq!(chunks.concat(), text);
    Ok(ChunkPlan {
        chunks,
        token_counts,
        budget,
    })
}

/// One word together with the whitespace that follows it (the first atom
/// also absorbs any leading whitespace), so that atoms partition the text.
struct Atom<'a> {
    text: &'a str,
    offset: usize,
}

fn atomize(text: &str) -> Vec<Atom<'_>> {
    let mut atoms = Vec::new();
    let mut pos = 0;
    let mut start = 0;
    while pos < text.len() {
        while pos < text.len() && !text[pos..].starts_with(char::is_whitespace) {
            pos += text[pos..].chars().next().map_or(1, char::len_utf8);
        }
        while pos < text.len() && text[pos..].starts_with(char::is_whitespace) {
            pos += text[pos..].chars().next().map_or(1, char::len_utf8);
        }
        if pos > start {
            atoms.push(Atom {
                text: &text[start..pos],
                offset: start,
            });
            start = pos;
        }
    }
    atoms
}

fn longest_char_prefix_within(word: &str, budget: usize, counter: &TokenCounter) -> usize {
    let mut best = 0;
    for (i, ch) in word.char_indices() {
        let end = i + ch.len_utf8();
        if counter.count(&word[..end]) <= budget {
            best = end;
        } else {
            break;
        }
    }
    best
}
