//! Needle-in-a-haystack generators.
//!
//! Needle sentences follow the public convention
//! `One of the special magic numbers for {key} is: {value}.` with
//! adjective-noun keys and 7-digit values. Variants differ in how many
//! distractor needles surround the queried ones and in how many keys or
//! values the question asks for.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::words::{fill_to_tokens, fresh_key, fresh_number};
use super::{mix_seed, weave, SynthError, TaskFamily, TaskInstance};
use crate::tokens::TokenCounter;
use crate::verify::AnswerMode;

/// Where haystack filler comes from.
#[derive(Debug, Clone, Default)]
pub enum HaystackSource {
    /// Seeded noise sentences from the built-in word pool.
    #[default]
    Noise,
    /// Words drawn cyclically from caller-provided paragraphs.
    Paragraphs(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct NiahSpec {
    pub family: TaskFamily,
    pub haystack: HaystackSource,
    /// Needles with unrelated keys planted alongside the queried ones.
    /// `None` uses the family default.
    pub num_distractor_needles: Option<usize>,
    /// Keys asked about (multiquery) or values per key (multivalue).
    /// Ignored for the single/multikey families.
    pub num_queries_or_values: usize,
    pub target_tokens: usize,
    pub seed: u64,
}

impl NiahSpec {
    pub fn new(family: TaskFamily, target_tokens: usize, seed: u64) -> Self {
        NiahSpec {
            family,
            haystack: HaystackSource::Noise,
            num_distractor_needles: None,
            num_queries_or_values: 4,
            target_tokens,
            seed,
        }
    }

    fn default_distractors(family: TaskFamily) -> usize {
        match family {
            TaskFamily::NiahSingle1 => 0,
            TaskFamily::NiahSingle2 => 4,
            TaskFamily::NiahSingle3 => 8,
            TaskFamily::NiahMultikey1 => 16,
            TaskFamily::NiahMultikey2 => 32,
            TaskFamily::NiahMultikey3 => 64,
            _ => 4,
        }
    }
}

pub(crate) fn needle_sentence(key: &str, value: &str) -> String {
    format!("One of the special magic numbers for {key} is: {value}.")
}

/// Generate one needle-retrieval instance.
pub fn gen_niah(spec: &NiahSpec, counter: &TokenCounter) -> Result<TaskInstance, SynthError> {
    let family = spec.family;
    let is_niah = matches!(
        family,
        TaskFamily::NiahSingle1
            | TaskFamily::NiahSingle2
            | TaskFamily::NiahSingle3
            | TaskFamily::NiahMultikey1
            | TaskFamily::NiahMultikey2
            | TaskFamily::NiahMultikey3
            | TaskFamily::NiahMultiquery
            | TaskFamily::NiahMultivalue
    );
    if !is_niah {
        return Err(SynthError::BadSpec(format!(
            "gen_niah cannot build family {family}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, family as u64));
    let distractors = spec
        .num_distractor_needles
        .unwrap_or_else(|| NiahSpec::default_distractors(family));

    let (query_keys, values_per_key) = match family {
        TaskFamily::NiahMultiquery => (spec.num_queries_or_values.max(1), 1),
        TaskFamily::NiahMultivalue => (1, spec.num_queries_or_values.max(1)),
        _ => (1, 1),
    };

    let mut keys: Vec<String> = Vec::new();
    for _ in 0..(query_keys + distractors) {
        let key = fresh_key(&mut rng, &keys).ok_or(SynthError::Exhausted("needle key"))?;
        keys.push(key);
    }

    let mut values: Vec<String> = Vec::new();
    let mut statements: Vec<String> = Vec::new();
    let mut query_values: Vec<String> = Vec::new();
    for (key_idx, key) in keys.iter().enumerate() {
        let per_key = if key_idx < query_keys { values_per_key } else { 1 };
        for _ in 0..per_key {
            let value = fresh_number(&mut rng, 7, &values)
                .ok_or(SynthError::Exhausted("needle value"))?;
            values.push(value.clone());
            statements.push(needle_sentence(key, &value));
            if key_idx < query_keys {
                query_values.push(value);
            }
        }
    }

    let fixed_tokens: usize = statements.iter().map(|s| counter.count(s)).sum();
    if fixed_tokens * 5 > spec.target_tokens * 3 {
        return Err(SynthError::TargetTooSmall {
            target: spec.target_tokens,
            fixed: fixed_tokens,
        });
    }

    let filler = filler_words(
        &spec.haystack,
        &mut rng,
        counter,
        spec.target_tokens - fixed_tokens,
    );
    let (context, offsets) = weave(&filler, &statements, &mut rng);

    // Offsets of the queried needles only (the first query_keys*values_per_key
    // statements).
    let golden_positions: Vec<usize> = offsets
        .into_iter()
        .take(query_keys * values_per_key)
        .collect();

    let question = match family {
        TaskFamily::NiahMultiquery => {
            let listed = keys[..query_keys].join(", ");
            format!("What are all the special magic numbers for {listed} mentioned in the provided text?")
        }
        TaskFamily::NiahMultivalue => format!(
            "What are all the special magic numbers for {} mentioned in the provided text?",
            keys[0]
        ),
        _ => format!(
            "What is the special magic number for {} mentioned in the provided text?",
            keys[0]
        ),
    };

    let answer_mode = family.answer_mode();
    debug_assert!(match answer_mode {
        AnswerMode::AnyOf => query_values.len() == 1,
        AnswerMode::AllOf => !query_values.is_empty(),
    });

    Ok(TaskInstance {
        instance_id: format!("{family}-{}-{:016x}", spec.target_tokens, spec.seed),
        family,
        context,
        question,
        answers: query_values,
        answer_mode,
        target_token_count: spec.target_tokens,
        golden_positions,
        tags: Vec::new(),
    })
}

fn filler_words(
    source: &HaystackSource,
    rng: &mut ChaCha8Rng,
    counter: &TokenCounter,
    tokens_needed: usize,
) -> Vec<String> {
    match source {
        HaystackSource::Noise => fill_to_tokens(rng, counter, tokens_needed),
        HaystackSource::Paragraphs(paragraphs) => {
            let mut words = Vec::new();
            let mut acc = counter.accumulator();
            let stream = paragraphs
                .iter()
                .flat_map(|p| p.split_whitespace())
                .cycle();
            for word in stream {
                let mut probe = acc;
                counter.accumulate(&mut probe, &format!("{word} "));
                if counter.total(&probe) > tokens_needed {
                    break;
                }
                acc = probe;
                words.push(word.to_string());
            }
            words
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> TokenCounter {
        TokenCounter::whitespace()
    }

    #[test]
    fn single_has_exactly_one_queried_needle() {
        let spec = NiahSpec::new(TaskFamily::NiahSingle1, 2000, 7);
        let inst = gen_niah(&spec, &counter()).unwrap();
        assert_eq!(inst.answers.len(), 1);
        assert_eq!(inst.answer_mode, AnswerMode::AnyOf);
        assert_eq!(inst.golden_positions.len(), 1);
        inst.validate(&counter()).unwrap();
        // Needle count in the emitted text matches the plan: 1 query needle.
        let occurrences = inst.context.matches("special magic numbers").count();
        assert_eq!(occurrences, 1);
    }

    #[test]
    fn multikey_plants_distractor_needles() {
        let spec = NiahSpec::new(TaskFamily::NiahMultikey1, 4000, 9);
        let inst = gen_niah(&spec, &counter()).unwrap();
        let occurrences = inst.context.matches("special magic numbers").count();
        assert_eq!(occurrences, 1 + 16);
        assert_eq!(inst.answers.len(), 1);
        inst.validate(&counter()).unwrap();
    }

    #[test]
    fn multivalue_is_all_of_with_requested_values() {
        let mut spec = NiahSpec::new(TaskFamily::NiahMultivalue, 3000, 11);
        spec.num_queries_or_values = 4;
        let inst = gen_niah(&spec, &counter()).unwrap();
        assert_eq!(inst.answer_mode, AnswerMode::AllOf);
        assert_eq!(inst.answers.len(), 4);
        inst.validate(&counter()).unwrap();
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = NiahSpec::new(TaskFamily::NiahSingle2, 2500, 21);
        let a = gen_niah(&spec, &counter()).unwrap();
        let b = gen_niah(&spec, &counter()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn golden_positions_point_at_needles() {
        let spec = NiahSpec::new(TaskFamily::NiahSingle3, 2200, 33);
        let inst = gen_niah(&spec, &counter()).unwrap();
        let at: String = inst
            .context
            .chars()
            .skip(inst.golden_positions[0])
            .take(30)
            .collect();
        assert!(at.starts_with("One of the special magic"));
    }

    #[test]
    fn tiny_target_rejected() {
        let spec = NiahSpec::new(TaskFamily::NiahMultikey3, 100, 5);
        assert!(matches!(
            gen_niah(&spec, &counter()),
            Err(SynthError::TargetTooSmall { .. })
        ));
    }
}
