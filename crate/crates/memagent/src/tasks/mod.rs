//! Synthetic long-context task generation with controllable lengths.
//!
//! Every generator is a pure function of its spec and seed: the same call
//! always yields a byte-identical instance. Retrieval families guarantee
//! that every answer string occurs verbatim in the context, and actual
//! context length lands within 2% of the requested target.

mod dataset_io;
mod filter;
mod fwe;
mod niah;
mod qa;
mod vt;
pub(crate) mod words;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset_io::{read_instances, write_instances, DatasetFileEntry, DatasetManifest};
pub use filter::{filter_known_questions, FilterOutcome};
pub use fwe::{count_top_k, gen_freq_words, FreqWordsSpec};
pub use niah::{gen_niah, HaystackSource, NiahSpec};
pub use qa::{build_qa_haystack, CorpusArticle, QaSpec};
pub use vt::{gen_variable_tracking, reachable_from_root, VariableTrackingSpec};

use crate::tokens::TokenCounter;
use crate::verify::{AnswerMode, AnswerSet};
use crate::workflow::EpisodeInput;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could not generate a fresh {0} within the retry budget")]
    Exhausted(&'static str),
    #[error("target of {target} tokens is too small: fixed content alone needs {fixed}")]
    TargetTooSmall { target: usize, fixed: usize },
    #[error("need {needed} distractor articles but the pool has only {available}")]
    InsufficientDistractors { needed: usize, available: usize },
    #[error(
        "frequency separation unachievable after {attempts} attempts; \
         increase num_tokens (currently {num_tokens})"
    )]
    NoSeparation { attempts: usize, num_tokens: usize },
    #[error("{0}")]
    BadSpec(String),
}

/// Task families, named after the public synthetic-benchmark conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskFamily {
    #[serde(rename = "niah_single_1")]
    NiahSingle1,
    #[serde(rename = "niah_single_2")]
    NiahSingle2,
    #[serde(rename = "niah_single_3")]
    NiahSingle3,
    #[serde(rename = "niah_multikey_1")]
    NiahMultikey1,
    #[serde(rename = "niah_multikey_2")]
    NiahMultikey2,
    #[serde(rename = "niah_multikey_3")]
    NiahMultikey3,
    #[serde(rename = "niah_multiquery")]
    NiahMultiquery,
    #[serde(rename = "niah_multivalue")]
    NiahMultivalue,
    #[serde(rename = "variable_tracking")]
    VariableTracking,
    #[serde(rename = "freq_words")]
    FreqWords,
    #[serde(rename = "qa_haystack")]
    QaHaystack,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 11] = [
        TaskFamily::NiahSingle1,
        TaskFamily::NiahSingle2,
        TaskFamily::NiahSingle3,
        TaskFamily::NiahMultikey1,
        TaskFamily::NiahMultikey2,
        TaskFamily::NiahMultikey3,
        TaskFamily::NiahMultiquery,
        TaskFamily::NiahMultivalue,
        TaskFamily::VariableTracking,
        TaskFamily::FreqWords,
        TaskFamily::QaHaystack,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskFamily::NiahSingle1 => "niah_single_1",
            TaskFamily::NiahSingle2 => "niah_single_2",
            TaskFamily::NiahSingle3 => "niah_single_3",
            TaskFamily::NiahMultikey1 => "niah_multikey_1",
            TaskFamily::NiahMultikey2 => "niah_multikey_2",
            TaskFamily::NiahMultikey3 => "niah_multikey_3",
            TaskFamily::NiahMultiquery => "niah_multiquery",
            TaskFamily::NiahMultivalue => "niah_multivalue",
            TaskFamily::VariableTracking => "variable_tracking",
            TaskFamily::FreqWords => "freq_words",
            TaskFamily::QaHaystack => "qa_haystack",
        }
    }

    pub fn parse(name: &str) -> Option<TaskFamily> {
        TaskFamily::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Families whose answers must appear verbatim in the context.
    pub fn is_retrieval(&self) -> bool {
        !matches!(self, TaskFamily::FreqWords)
    }

    /// The coverage-reward families.
    pub fn answer_mode(&self) -> AnswerMode {
        match self {
            TaskFamily::NiahMultiquery
            | TaskFamily::NiahMultivalue
            | TaskFamily::VariableTracking
            | TaskFamily::FreqWords => AnswerMode::AllOf,
            _ => AnswerMode::AnyOf,
        }
    }
}

impl std::fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One synthetic long-context problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub family: TaskFamily,
    pub context: String,
    pub question: String,
    pub answers: Vec<String>,
    pub answer_mode: AnswerMode,
    pub target_token_count: usize,
    /// Character offsets of the planted evidence within `context`.
    pub golden_positions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl TaskInstance {
    pub fn answer_set(&self) -> AnswerSet {
        AnswerSet {
            answers: self.answers.clone(),
            mode: self.answer_mode,
        }
    }

    pub fn episode_input(&self) -> EpisodeInput {
        EpisodeInput {
            sample_id: self.instance_id.clone(),
            question: self.question.clone(),
            context: self.context.clone(),
        }
    }

    /// Check the instance invariants: answers present (retrieval families),
    /// coverage mode where required, and length within 2% of target.
    pub fn validate(&self, counter: &TokenCounter) -> Result<(), String> {
        if self.answers.is_empty() {
            return Err("empty answer set".into());
        }
        if self.answer_mode != self.family.answer_mode() {
            return Err(format!(
                "family {} requires answer mode {:?}",
                self.family,
                self.family.answer_mode()
            ));
        }
        if self.family.is_retrieval() {
            for answer in &self.answers {
                if !self.context.contains(answer.as_str()) {
                    return Err(format!("answer {answer:?} not found in context"));
                }
            }
        }
        let actual = counter.count(&self.context);
        let target = self.target_token_count as f64;
        if target > 0.0 && ((actual as f64 - target).abs() / target) > 0.02 {
            return Err(format!(
                "context is {actual} tokens, more than 2% from target {}",
                self.target_token_count
            ));
        }
        Ok(())
    }
}

/// Strictly increasing ladder of sizes (article counts or token targets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthSchedule {
    pub values: Vec<usize>,
}

impl LengthSchedule {
    pub fn new(values: Vec<usize>) -> Result<Self, SynthError> {
        if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SynthError::BadSpec(
                "length schedule must be non-empty and strictly increasing".into(),
            ));
        }
        Ok(LengthSchedule { values })
    }

    /// Doubling ladder from `start`, `n` rungs.
    pub fn doubling(start: usize, n: usize) -> Self {
        LengthSchedule {
            values: (0..n).map(|i| start << i).collect(),
        }
    }

    /// Default article-count ladder for haystack QA: 50 doubling to 6400.
    pub fn qa_articles() -> Self {
        Self::doubling(50, 8)
    }

    /// Default token-target ladder for the synthetic families: 8K to 512K.
    pub fn synthetic_tokens() -> Self {
        Self::doubling(8 << 10, 7)
    }
}

/// Stable seed derivation for per-instance and per-attempt substreams.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splice statements into filler at seeded, distinct, uniformly chosen word
/// gaps. Returns the assembled text and the char offset of each statement in
/// the order given.
pub(crate) fn weave(
    filler: &[String],
    statements: &[String],
    rng: &mut ChaCha8Rng,
) -> (String, Vec<usize>) {
    use rand::seq::index::sample;

    let gaps = filler.len() + 1;
    // sample() yields the gaps in random order, so statement i gets an
    // unbiased position independent of its index.
    let positions: Vec<usize> = if statements.len() >= gaps {
        (0..statements.len()).map(|i| i % gaps).collect()
    } else {
        sample(rng, gaps, statements.len()).into_vec()
    };
    let mut placed: Vec<(usize, usize)> = positions.into_iter().zip(0..statements.len()).collect();
    placed.sort_unstable();

    let mut text = String::new();
    let mut offsets = vec![0usize; statements.len()];
    let mut chars_so_far = 0usize;
    let mut next = placed.into_iter().peekable();

    let push_piece = |text: &mut String, chars: &mut usize, piece: &str| {
        if !text.is_empty() {
            text.push(' ');
            *chars += 1;
        }
        *chars += piece.chars().count();
        text.push_str(piece);
    };

    for gap in 0..gaps {
        while next.peek().is_some_and(|&(g, _)| g == gap) {
            let (_, stmt_idx) = next.next().unwrap();
            let piece = &statements[stmt_idx];
            let lead = if text.is_empty() { 0 } else { 1 };
            offsets[stmt_idx] = chars_so_far + lead;
            push_piece(&mut text, &mut chars_so_far, piece);
        }
        if gap < filler.len() {
            push_piece(&mut text, &mut chars_so_far, &filler[gap]);
        }
    }
    (text, offsets)
}
