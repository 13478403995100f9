//! Haystack QA: golden paragraphs embedded in shuffled distractor articles
//! drawn from the same corpus.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SynthError, TaskFamily, TaskInstance};
use crate::tokens::TokenCounter;
use crate::verify::AnswerMode;

/// One corpus paragraph with a stable id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusArticle {
    pub article_id: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub token_count: usize,
}

impl CorpusArticle {
    pub fn new(
        article_id: impl Into<String>,
        title: impl Into<String>,
        text: impl Into<String>,
        counter: &TokenCounter,
    ) -> Self {
        let text = text.into();
        CorpusArticle {
            article_id: article_id.into(),
            title: title.into(),
            token_count: counter.count(&text),
            text,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QaSpec {
    pub instance_id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub n_articles: usize,
    pub seed: u64,
}

/// Embed the golden articles among distractors sampled without replacement
/// from the pool, shuffle the order, and record where the goldens landed.
/// Distractors sharing an `article_id` with a golden are excluded.
pub fn build_qa_haystack(
    spec: &QaSpec,
    goldens: &[CorpusArticle],
    distractor_pool: &[CorpusArticle],
    counter: &TokenCounter,
) -> Result<TaskInstance, SynthError> {
    if goldens.is_empty() {
        return Err(SynthError::BadSpec("no golden articles".into()));
    }
    if spec.n_articles < goldens.len() {
        return Err(SynthError::BadSpec(format!(
            "n_articles {} is smaller than the {} golden articles",
            spec.n_articles,
            goldens.len()
        )));
    }
    let golden_ids: Vec<&str> = goldens.iter().map(|a| a.article_id.as_str()).collect();
    let candidates: Vec<&CorpusArticle> = distractor_pool
        .iter()
        .filter(|a| !golden_ids.contains(&a.article_id.as_str()))
        .collect();
    let needed = spec.n_articles - goldens.len();
    if candidates.len() < needed {
        return Err(SynthError::InsufficientDistractors {
            needed,
            available: candidates.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x9A));
    let mut picked: Vec<&CorpusArticle> = candidates
        .choose_multiple(&mut rng, needed)
        .copied()
        .collect();
    let mut articles: Vec<&CorpusArticle> = goldens.iter().collect();
    articles.append(&mut picked);
    articles.shuffle(&mut rng);

    let mut context = String::new();
    let mut chars_so_far = 0usize;
    let mut golden_positions = Vec::new();
    for (i, article) in articles.iter().enumerate() {
        let block = format!("Document {}:\n{}\n\n{}", i + 1, article.title, article.text);
        if i > 0 {
            context.push_str("\n\n");
            chars_so_far += 2;
        }
        if golden_ids.contains(&article.article_id.as_str()) {
            golden_positions.push(chars_so_far);
        }
        chars_so_far += block.chars().count();
        context.push_str(&block);
    }

    let target_token_count = counter.count(&context);
    Ok(TaskInstance {
        instance_id: spec.instance_id.clone(),
        family: TaskFamily::QaHaystack,
        context,
        question: spec.question.clone(),
        answers: spec.answers.clone(),
        answer_mode: AnswerMode::AnyOf,
        target_token_count,
        golden_positions,
        tags: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> TokenCounter {
        TokenCounter::whitespace()
    }

    fn article(id: usize, words: usize, payload: &str) -> CorpusArticle {
        let mut text: Vec<String> = (0..words.saturating_sub(1))
            .map(|i| format!("body{i}"))
            .collect();
        text.push(payload.to_string());
        CorpusArticle::new(
            format!("art-{id}"),
            format!("Title {id}"),
            text.join(" "),
            &counter(),
        )
    }

    fn pool(n: usize) -> Vec<CorpusArticle> {
        (100..100 + n).map(|i| article(i, 140, "filler")).collect()
    }

    #[test]
    fn fifty_articles_of_140_tokens_is_about_7k() {
        let goldens = vec![
            article(0, 140, "the answer is haystack-echo"),
            article(1, 140, "supporting evidence"),
        ];
        let spec = QaSpec {
            instance_id: "qa-0".into(),
            question: "Where is the echo?".into(),
            answers: vec!["haystack-echo".into()],
            n_articles: 50,
            seed: 5,
        };
        let inst = build_qa_haystack(&spec, &goldens, &pool(80), &counter()).unwrap();
        let tokens = counter().count(&inst.context);
        // 50 articles x ~143 tokens (body + header) lands near 7K.
        assert!((6500..=7800).contains(&tokens), "got {tokens}");
        assert_eq!(inst.golden_positions.len(), 2);
        inst.validate(&counter()).unwrap();
    }

    #[test]
    fn exactly_goldens_when_n_equals_golden_count() {
        let goldens = vec![article(0, 30, "alpha"), article(1, 30, "beta")];
        let spec = QaSpec {
            instance_id: "qa-1".into(),
            question: "q?".into(),
            answers: vec!["alpha".into()],
            n_articles: 2,
            seed: 6,
        };
        let inst = build_qa_haystack(&spec, &goldens, &pool(10), &counter()).unwrap();
        assert_eq!(inst.context.matches("Document ").count(), 2);
        assert!(inst.context.contains("alpha") && inst.context.contains("beta"));
    }

    #[test]
    fn same_seed_identical_instance() {
        let goldens = vec![article(0, 40, "alpha")];
        let spec = QaSpec {
            instance_id: "qa-2".into(),
            question: "q?".into(),
            answers: vec!["alpha".into()],
            n_articles: 8,
            seed: 7,
        };
        let a = build_qa_haystack(&spec, &goldens, &pool(20), &counter()).unwrap();
        let b = build_qa_haystack(&spec, &goldens, &pool(20), &counter()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shortfall_is_reported() {
        let goldens = vec![article(0, 40, "alpha")];
        let spec = QaSpec {
            instance_id: "qa-3".into(),
            question: "q?".into(),
            answers: vec!["alpha".into()],
            n_articles: 50,
            seed: 8,
        };
        let err = build_qa_haystack(&spec, &goldens, &pool(10), &counter()).unwrap_err();
        match err {
            SynthError::InsufficientDistractors { needed, available } => {
                assert_eq!(needed, 49);
                assert_eq!(available, 10);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn goldens_excluded_from_distractor_sampling() {
        let golden = article(100, 40, "alpha"); // same id as a pool entry
        let spec = QaSpec {
            instance_id: "qa-4".into(),
            question: "q?".into(),
            answers: vec!["alpha".into()],
            n_articles: 11,
            seed: 9,
        };
        let err = build_qa_haystack(&spec, &[golden], &pool(10), &counter()).unwrap_err();
        assert!(matches!(
            err,
            SynthError::InsufficientDistractors {
                needed: 10,
                available: 9
            }
        ));
    }
}
