//! Frequent-words extraction: synthetic words drawn from a power-law rank
//! distribution; the question asks for the top-k most frequent.

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

use super::words::fresh_pseudo_word;
use super::{mix_seed, SynthError, TaskFamily, TaskInstance};
use crate::tokens::TokenCounter;
use crate::verify::AnswerMode;

#[derive(Debug, Clone)]
pub struct FreqWordsSpec {
    /// Power-law exponent of the rank distribution; must exceed 1.
    pub alpha: f64,
    pub vocab_size: usize,
    /// Number of words sampled into the context.
    pub num_tokens: usize,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for FreqWordsSpec {
    fn default() -> Self {
        FreqWordsSpec {
            alpha: 2.0,
            vocab_size: 1000,
            num_tokens: 4096,
            top_k: 3,
            seed: 0,
        }
    }
}

const MAX_ATTEMPTS: usize = 64;

pub fn gen_freq_words(
    spec: &FreqWordsSpec,
    counter: &TokenCounter,
) -> Result<TaskInstance, SynthError> {
    if spec.alpha <= 1.0 {
        return Err(SynthError::BadSpec("alpha must be > 1".into()));
    }
    if spec.top_k == 0 || spec.top_k >= spec.vocab_size {
        return Err(SynthError::BadSpec(
            "top_k must be in 1..vocab_size".into(),
        ));
    }
    if spec.num_tokens == 0 {
        return Err(SynthError::BadSpec("num_tokens must be >= 1".into()));
    }

    let mut vocab_rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xF3E));
    let mut vocab: Vec<String> = Vec::with_capacity(spec.vocab_size);
    for _ in 0..spec.vocab_size {
        let word =
            fresh_pseudo_word(&mut vocab_rng, &vocab).ok_or(SynthError::Exhausted("word"))?;
        vocab.push(word);
    }

    // Rank r (1-based) maps to vocab[r-1]; resample until the empirical
    // top-k is exactly the planted top-k with a strict count gap to rank k+1.
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xF3E + 1 + attempt as u64));
        let zipf = Zipf::new(spec.vocab_size as u64, spec.alpha)
            .map_err(|e| SynthError::BadSpec(format!("zipf: {e}")))?;
        let mut counts = vec![0usize; spec.vocab_size];
        let mut sampled: Vec<&str> = Vec::with_capacity(spec.num_tokens);
        for _ in 0..spec.num_tokens {
            let rank = zipf.sample(&mut rng) as usize; // 1-based
            counts[rank - 1] += 1;
            sampled.push(&vocab[rank - 1]);
        }

        let top_count_min = (0..spec.top_k).map(|i| counts[i]).min().unwrap_or(0);
        let rest_count_max = (spec.top_k..spec.vocab_size)
            .map(|i| counts[i])
            .max()
            .unwrap_or(0);
        if top_count_min > rest_count_max {
            let context = sampled.join(" ");
            let answers: Vec<String> = vocab[..spec.top_k].to_vec();
            // num_tokens counts sampled words; record the target under the
            // configured counter so length fidelity is counter-consistent.
            let target_token_count = counter.count(&context);
            return Ok(TaskInstance {
                instance_id: format!("freq_words-{}-{:016x}", spec.num_tokens, spec.seed),
                family: TaskFamily::FreqWords,
                context,
                question: format!(
                    "What are the {} most frequently appeared words in the above coded text?",
                    spec.top_k
                ),
                answers,
                answer_mode: AnswerMode::AllOf,
                target_token_count,
                golden_positions: Vec::new(),
                tags: Vec::new(),
            });
        }
    }
    Err(SynthError::NoSeparation {
        attempts: MAX_ATTEMPTS,
        num_tokens: spec.num_tokens,
    })
}

/// Independent count oracle: word frequencies of a whitespace-separated
/// text, returning the top-k words ordered by descending count.
pub fn count_top_k(context: &str, k: usize) -> Vec<(String, usize)> {
    let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for word in context.split_whitespace() {
        *counts.entry(word).or_insert(0) += 1;
    }
    let mut pairs: Vec<(String, usize)> =
        counts.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.truncate(k);
    pairs
}
