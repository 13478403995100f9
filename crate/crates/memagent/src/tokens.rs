//! Pluggable token counting.
//!
//! Budgets, chunking, truncation, and task synthesis all measure text through
//! one [`TokenCounter`] so that every component agrees on what a "token" is.
//! Three modes are supported: whitespace words, character count divided by
//! four, and an external vocabulary file with minimal-piece segmentation.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenCounterError {
    #[error("vocab file {path}: {source}")]
    VocabUnreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("vocab file {path} contains no entries")]
    VocabEmpty { path: String },
    #[error("unknown counter spec {0:?}; expected whitespace, chars_div_4, or vocab:<path>")]
    UnknownSpec(String),
}

/// Deterministic text-to-token-count mapping.
///
/// Counts satisfy `count("") == 0` and the near-additivity bound
/// `count(a + b) <= count(a) + count(b) + 1`, which the chunker and the
/// truncation logic rely on.
#[derive(Debug, Clone)]
pub enum TokenCounter {
    /// One token per whitespace-separated word. The default everywhere.
    Whitespace,
    /// `ceil(chars / 4)` over Unicode scalar values, whitespace included.
    CharsDiv4,
    /// Words found in the vocabulary cost their minimal segmentation into
    /// vocabulary pieces; any character not covered costs one token.
    ExternalVocab { path: String, vocab: Vocab },
}

impl Default for TokenCounter {
    fn default() -> Self {
        TokenCounter::Whitespace
    }
}

impl fmt::Display for TokenCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenCounter::Whitespace => write!(f, "whitespace"),
            TokenCounter::CharsDiv4 => write!(f, "chars_div_4"),
            TokenCounter::ExternalVocab { path, .. } => write!(f, "vocab:{path}"),
        }
    }
}

/// Loaded vocabulary: one piece per line, deduplicated.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    pieces: HashSet<String>,
    max_piece_chars: usize,
}

impl Vocab {
    fn from_lines<I: IntoIterator<Item = String>>(lines: I) -> Self {
        let mut pieces = HashSet::new();
        let mut max_piece_chars = 0;
        for line in lines {
            let piece = line.trim();
            if piece.is_empty() {
                continue;
            }
            max_piece_chars = max_piece_chars.max(piece.chars().count());
            pieces.insert(piece.to_string());
        }
        Vocab {
            pieces,
            max_piece_chars,
        }
    }

    /// Minimal number of pieces covering `word`, where any single character
    /// is always an admissible piece of cost 1. Dynamic program over char
    /// boundaries; subadditive under concatenation by construction.
    fn word_cost(&self, word: &str) -> usize {
        if word.is_empty() {
            return 0;
        }
        let boundaries: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = boundaries.len() - 1;
        let mut best = vec![usize::MAX; n + 1];
        best[0] = 0;
        for i in 0..n {
            if best[i] == usize::MAX {
                continue;
            }
            let max_j = (i + self.max_piece_chars.max(1)).min(n);
            for j in (i + 1)..=max_j {
                let piece = &word[boundaries[i]..boundaries[j]];
                let cost = if j == i + 1 || self.pieces.contains(piece) {
                    1
                } else {
                    continue;
                };
                best[j] = best[j].min(best[i] + cost);
            }
        }
        best[n]
    }
}

impl TokenCounter {
    pub fn whitespace() -> Self {
        TokenCounter::Whitespace
    }

    pub fn chars_div_4() -> Self {
        TokenCounter::CharsDiv4
    }

    /// Parse a counter spec string: `whitespace`, `chars_div_4`, or
    /// `vocab:<path>`.
    pub fn parse_spec(spec: &str) -> Result<Self, TokenCounterError> {
        match spec {
            "whitespace" => Ok(TokenCounter::Whitespace),
            "chars_div_4" => Ok(TokenCounter::CharsDiv4),
            other => match other.strip_prefix("vocab:") {
                Some(path) => TokenCounter::external_vocab(path),
                None => Err(TokenCounterError::UnknownSpec(other.to_string())),
            },
        }
    }

    pub fn external_vocab<P: AsRef<Path>>(path: P) -> Result<Self, TokenCounterError> {
        let path_str = path.as_ref().display().to_string();
        let raw = std::fs::read_to_string(&path).map_err(|source| {
            TokenCounterError::VocabUnreadable {
                path: path_str.clone(),
                source,
            }
        })?;
        let vocab = Vocab::from_lines(raw.lines().map(|l| l.to_string()));
        if vocab.pieces.is_empty() {
            return Err(TokenCounterError::VocabEmpty { path: path_str });
        }
        Ok(TokenCounter::ExternalVocab {
            path: path_str,
            vocab,
        })
    }

    /// Token count of `text`. Deterministic; `count("") == 0`.
    pub fn count(&self, text: &str) -> usize {
        match self {
            TokenCounter::Whitespace => text.split_whitespace().count(),
            TokenCounter::CharsDiv4 => text.chars().count().div_ceil(4),
            TokenCounter::ExternalVocab { vocab, .. } => text
                .split_whitespace()
                .map(|word| vocab.word_cost(word))
                .sum(),
        }
    }

    /// Byte length of the longest prefix of `text` whose count stays within
    /// `budget`, cutting only at positions where the count is well-defined
    /// for the mode (word boundaries for word-based modes, char boundaries
    /// otherwise). Used for hard memory truncation.
    pub fn prefix_within(&self, text: &str, budget: usize) -> usize {
        match self {
            TokenCounter::Whitespace => {
                let mut seen = 0usize;
                let mut in_word = false;
                for (i, ch) in text.char_indices() {
                    if ch.is_whitespace() {
                        in_word = false;
                    } else if !in_word {
                        in_word = true;
                        seen += 1;
                        if seen > budget {
                            return i;
                        }
                    }
                }
                text.len()
            }
            TokenCounter::CharsDiv4 => {
                let max_chars = budget.saturating_mul(4);
                match text.char_indices().nth(max_chars) {
                    Some((i, _)) => i,
                    None => text.len(),
                }
            }
            TokenCounter::ExternalVocab { vocab, .. } => {
                let mut total = 0usize;
                for (start, word) in split_words(text) {
                    total += vocab.word_cost(word);
                    if total > budget {
                        return start;
                    }
                }
                text.len()
            }
        }
    }

    /// Truncate `text` to at most `budget` tokens, returning the prefix and
    /// whether anything was cut.
    pub fn truncate(&self, text: &str, budget: usize) -> (String, bool) {
        let cut = self.prefix_within(text, budget);
        if cut >= text.len() {
            (text.to_string(), false)
        } else {
            (text[..cut].to_string(), true)
        }
    }

    /// Fresh incremental accumulator. Feeding it text pieces that join at
    /// whitespace boundaries yields the same total as [`Self::count`] on the
    /// concatenation, in O(piece) per feed.
    pub fn accumulator(&self) -> CountAcc {
        match self {
            TokenCounter::Whitespace => CountAcc::Words(0),
            TokenCounter::CharsDiv4 => CountAcc::Chars(0),
            TokenCounter::ExternalVocab { .. } => CountAcc::VocabCost(0),
        }
    }

    /// Add one piece (ending, when followed by more text, at a whitespace
    /// boundary) to the accumulator.
    pub fn accumulate(&self, acc: &mut CountAcc, piece: &str) {
        match (self, acc) {
            (TokenCounter::Whitespace, CountAcc::Words(w)) => {
                *w += piece.split_whitespace().count();
            }
            (TokenCounter::CharsDiv4, CountAcc::Chars(c)) => {
                *c += piece.chars().count();
            }
            (TokenCounter::ExternalVocab { vocab, .. }, CountAcc::VocabCost(c)) => {
                *c += piece
                    .split_whitespace()
                    .map(|w| vocab.word_cost(w))
                    .sum::<usize>();
            }
            _ => unreachable!("accumulator mode mismatch"),
        }
    }

    /// Token total the accumulator represents.
    pub fn total(&self, acc: &CountAcc) -> usize {
        match acc {
            CountAcc::Words(w) => *w,
            CountAcc::Chars(c) => c.div_ceil(4),
            CountAcc::VocabCost(c) => *c,
        }
    }
}

/// Running state for incremental token counting.
#[derive(Debug, Clone, Copy)]
pub enum CountAcc {
    Words(usize),
    Chars(usize),
    VocabCost(usize),
}

/// Whitespace-delimited words of `text` with their starting byte offsets.
pub(crate) fn split_words(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace()
        .map(move |w| (w.as_ptr() as usize - text.as_ptr() as usize, w))
}
