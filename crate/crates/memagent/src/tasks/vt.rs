//! Variable-tracking generator: chains of assignments scattered through
//! noise, querying every variable that transitively holds the root value.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::words::{fill_to_tokens, fresh_number, fresh_var_name};
use super::{mix_seed, weave, SynthError, TaskFamily, TaskInstance};
use crate::tokens::TokenCounter;
use crate::verify::AnswerMode;

#[derive(Debug, Clone)]
pub struct VariableTrackingSpec {
    /// Variables per chain; the whole chain shares one value.
    pub chain_length: usize,
    /// Total chains. The first carries the queried value, the rest are
    /// decoys with their own values.
    pub num_chains: usize,
    pub target_tokens: usize,
    pub seed: u64,
}

impl VariableTrackingSpec {
    pub fn new(chain_length: usize, num_chains: usize, target_tokens: usize, seed: u64) -> Self {
        VariableTrackingSpec {
            chain_length,
            num_chains,
            target_tokens,
            seed,
        }
    }
}

pub fn gen_variable_tracking(
    spec: &VariableTrackingSpec,
    counter: &TokenCounter,
) -> Result<TaskInstance, SynthError> {
    if spec.chain_length == 0 || spec.num_chains == 0 {
        return Err(SynthError::BadSpec(
            "chain_length and num_chains must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x5654));

    let mut names: Vec<String> = Vec::new();
    let mut roots: Vec<String> = Vec::new();
    let mut statements: Vec<String> = Vec::new();
    let mut chain_answer: Vec<String> = Vec::new();

    for chain in 0..spec.num_chains {
        let root =
            fresh_number(&mut rng, 5, &roots).ok_or(SynthError::Exhausted("chain value"))?;
        roots.push(root.clone());
        let mut prev: Option<String> = None;
        for _ in 0..spec.chain_length {
            let name =
                fresh_var_name(&mut rng, 4, &names).ok_or(SynthError::Exhausted("variable"))?;
            names.push(name.clone());
            let rhs = prev.clone().unwrap_or_else(|| root.clone());
            statements.push(format!("VAR {name} = {rhs} ."));
            if chain == 0 {
                chain_answer.push(name.clone());
            }
            prev = Some(name);
        }
    }
    // Statement order in the text is independent of chain structure.
    statements.shuffle(&mut rng);

    let fixed_tokens: usize = statements.iter().map(|s| counter.count(s)).sum();
    if fixed_tokens * 5 > spec.target_tokens * 3 {
        return Err(SynthError::TargetTooSmall {
            target: spec.target_tokens,
            fixed: fixed_tokens,
        });
    }
    let filler = fill_to_tokens(&mut rng, counter, spec.target_tokens - fixed_tokens);
    let (context, offsets) = weave(&filler, &statements, &mut rng);

    // Golden positions are the statements of the queried chain.
    let golden_positions: Vec<usize> = statements
        .iter()
        .zip(&offsets)
        .filter(|(s, _)| chain_answer.iter().any(|n| s.contains(&format!("VAR {n} "))))
        .map(|(_, &o)| o)
        .collect();

    let question = format!(
        "Find all variables that are assigned the value {} in the text above.",
        roots[0]
    );

    Ok(TaskInstance {
        instance_id: format!(
            "variable_tracking-{}-{:016x}",
            spec.target_tokens, spec.seed
        ),
        family: TaskFamily::VariableTracking,
        context,
        question,
        answers: chain_answer,
        answer_mode: AnswerMode::AllOf,
        target_token_count: spec.target_tokens,
        golden_positions,
        tags: Vec::new(),
    })
}

/// Independent reachability oracle: variables equal to `root` under the
/// assignment statements found in `context`. Used by tests to cross-check
/// the generator's planted answer set.
pub fn reachable_from_root(context: &str, root: &str) -> Vec<String> {
    let re = regex::Regex::new(r"VAR ([A-Z]+) = ([A-Z0-9]+)").unwrap();
    let assigns: Vec<(String, String)> = re
        .captures_iter(context)
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .collect();
    let mut known: Vec<String> = Vec::new();
    loop {
        let mut grew = false;
        for (name, rhs) in &assigns {
            let rooted = rhs == root;
            if (rooted || known.contains(rhs)) && !known.contains(name) {
                known.push(name.clone());
                grew = true;
            }
        }
        if !grew {
            return known;
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
    fn single_variable_chain() {
        let spec = VariableTrackingSpec::new(1, 1, 1500, 3);
        let inst = gen_variable_tracking(&spec, &counter()).unwrap();
        assert_eq!(inst.answers.len(), 1);
        inst.validate(&counter()).unwrap();
    }

    #[test]
    fn decoy_chain_does_not_leak_into_answers() {
        let spec = VariableTrackingSpec::new(4, 2, 2500, 5);
        let inst = gen_variable_tracking(&spec, &counter()).unwrap();
        assert_eq!(inst.answers.len(), 4);
        let root = inst
            .question
            .split_whitespace()
            .find(|w| w.chars().all(|c| c.is_ascii_digit()))
            .unwrap();
        let mut oracle = reachable_from_root(&inst.context, root);
        let mut answers = inst.answers.clone();
        oracle.sort();
        answers.sort();
        assert_eq!(oracle, answers);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = VariableTrackingSpec::new(3, 2, 2000, 8);
        let a = gen_variable_tracking(&spec, &counter()).unwrap();
        let b = gen_variable_tracking(&spec, &counter()).unwrap();
        assert_eq!(a, b);
        let spec2 = VariableTrackingSpec { seed: 9, ..spec };
        let c = gen_variable_tracking(&spec2, &counter()).unwrap();
        assert_ne!(a.context, c.context);
    }

    #[test]
    fn golden_positions_cover_the_queried_chain() {
        let spec = VariableTrackingSpec::new(4, 2, 2500, 13);
        let inst = gen_variable_tracking(&spec, &counter()).unwrap();
        assert_eq!(inst.golden_positions.len(), 4);
        for &off in &inst.golden_positions {
            let at: String = inst.context.chars().skip(off).take(4).collect();
            assert_eq!(at, "VAR ");
        }
    }
}
