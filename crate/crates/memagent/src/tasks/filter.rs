//! Known-question filter: drop samples the model answers correctly without
//! any context, since those measure memorization rather than retrieval.

use crate::gateway::Gateway;
use crate::verify::score_completion;
use crate::workflow::prompt::{render_answer_prompt, EMPTY_MEMORY_SENTINEL};

use super::TaskInstance;

/// Result of filtering a sample set.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<TaskInstance>,
    /// Instance ids dropped because some attempt was verified correct.
    pub dropped: Vec<String>,
    /// Instance ids kept without a verdict because the gateway failed; these
    /// carry an `unfiltered` tag rather than passing silently.
    pub unfiltered: Vec<String>,
    pub attempts_per_sample: usize,
}

impl FilterOutcome {
    pub fn drop_rate(&self) -> f64 {
        let total = self.kept.len() + self.dropped.len();
        if total == 0 {
            0.0
        } else {
            self.dropped.len() as f64 / total as f64
        }
    }
}

/// Ask the model each question `attempts` times with the empty-memory
/// sentinel in place of any context; drop the sample when any attempt scores
/// a full reward.
pub fn filter_known_questions(
    samples: Vec<TaskInstance>,
    gateway: &dyn Gateway,
    attempts: usize,
    output_budget: usize,
) -> FilterOutcome {
    let mut outcome = FilterOutcome {
        attempts_per_sample: attempts,
        ..Default::default()
    };

    for mut sample in samples {
        let prompt = render_answer_prompt(&sample.question, EMPTY_MEMORY_SENTINEL);
        let answers = sample.answer_set();
        let mut verdict: Option<bool> = Some(false);
        for _ in 0..attempts {
            match gateway.complete(&prompt, output_budget) {
                Ok(completion) => {
                    if score_completion(&completion.text, &answers).score >= 1.0 {
                        verdict = Some(true);
                        break;
                    }
                }
                Err(_) => {
                    verdict = None;
                    break;
                }
            }
        }
        match verdict {
            Some(true) => outcome.dropped.push(sample.instance_id.clone()),
            Some(false) => outcome.kept.push(sample),
            None => {
                outcome.unfiltered.push(sample.instance_id.clone());
                sample.tags.push("unfiltered".to_string());
                outcome.kept.push(sample);
            }
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockScript};
    use crate::tasks::{gen_niah, NiahSpec, TaskFamily};
    use crate::tokens::TokenCounter;

    fn instances(n: usize) -> Vec<TaskInstance> {
        let counter = TokenCounter::whitespace();
        (0..n)
            .map(|i| {
                let spec = NiahSpec::new(TaskFamily::NiahSingle1, 1500, i as u64);
                gen_niah(&spec, &counter).unwrap()
            })
            .collect()
    }

    #[test]
    fn matching_fixed_answer_drops_sample() {
        let samples = instances(1);
        let truth = samples[0].answers[0].clone();
        let gateway = MockGateway::new(MockScript::fixed_answer(format!("\\boxed{{{truth}}}")));
        let outcome = filter_known_questions(samples, &gateway, 2, 64);
        assert_eq!(outcome.kept.len(), 0);
        assert_eq!(outcome.dropped.len(), 1);
        assert_eq!(outcome.drop_rate(), 1.0);
    }

    #[test]
    fn unknown_answer_keeps_sample() {
        let samples = instances(1);
        let gateway = MockGateway::new(MockScript::fixed_answer("\\boxed{unknown}"));
        let outcome = filter_known_questions(samples, &gateway, 2, 64);
        assert_eq!(outcome.kept.len(), 1);
        assert!(outcome.dropped.is_empty());
        assert!(outcome.kept[0].tags.is_empty());
    }

    #[test]
    fn gateway_failure_tags_unfiltered() {
        let samples = instances(1);
        let gateway = MockGateway::new(MockScript::replay([]));
        let outcome = filter_known_questions(samples, &gateway, 2, 64);
        assert_eq!(outcome.kept.len(), 1);
        assert_eq!(outcome.unfiltered.len(), 1);
        assert_eq!(outcome.kept[0].tags, vec!["unfiltered".to_string()]);
    }

    #[test]
    fn half_known_pool_drops_half() {
        // 20 samples; rig 10 of them so the mock's fixed answer is correct.
        let mut samples = instances(20);
        let magic = "5550123";
        for sample in samples.iter_mut().take(10) {
            sample.answers = vec![magic.to_string()];
            // keep the retrieval invariant intact for the rigged answer
            sample.context.push_str(&format!(
                " One of the special magic numbers for rigged-key is: {magic}."
            ));
        }
        let gateway = MockGateway::new(MockScript::fixed_answer(format!("\\boxed{{{magic}}}")));
        let outcome = filter_known_questions(samples, &gateway, 2, 64);
        assert_eq!(outcome.dropped.len(), 10);
        assert_eq!(outcome.kept.len(), 10);
        assert!((outcome.drop_rate() - 0.5).abs() < f64::EPSILON);
    }
}
