//! Rule-based answer verification.
//!
//! Rewards are computed only from the final answer of an episode, never from
//! intermediate memories. Two regimes exist: `any_of` scores 1 when the
//! prediction is equivalent to at least one ground truth, `all_of` scores the
//! fraction of ground truths contained in the prediction.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Which reward regime applies to a set of ground-truth answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    /// Ground truths are interchangeable; matching any one scores 1.
    AnyOf,
    /// Every ground truth must appear in the prediction; score is coverage.
    AllOf,
}

/// Non-empty set of ground-truth answers plus its reward regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub answers: Vec<String>,
    pub mode: AnswerMode,
}

impl AnswerSet {
    pub fn any_of<I, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AnswerSet {
            answers: answers.into_iter().map(Into::into).collect(),
            mode: AnswerMode::AnyOf,
        }
    }

    pub fn all_of<I, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AnswerSet {
            answers: answers.into_iter().map(Into::into).collect(),
            mode: AnswerMode::AllOf,
        }
    }

    /// True when the set is usable: non-empty and every answer survives
    /// normalization.
    pub fn is_valid(&self) -> bool {
        !self.answers.is_empty() && self.answers.iter().all(|a| !normalize(a).is_empty())
    }
}

/// Outcome of scoring one prediction against one [`AnswerSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResult {
    /// In `[0, 1]`. For `any_of` this is exactly 0 or 1; for `all_of` it is
    /// `matched / |answers|`.
    pub score: f64,
    /// One flag per ground truth, in input order.
    pub matched: Vec<bool>,
    /// The answer string the score was computed from.
    pub extracted_answer: String,
    /// Whether a `\boxed{...}` span was found when extraction was requested.
    pub extraction_ok: bool,
}

/// Contents of the last `\boxed{...}` in `completion`, with balanced-brace
/// matching. When several boxes appear the last opening wins, so
/// `\boxed{a\boxed{b}}` yields `b`. Without any box, the whole trimmed
/// completion is returned and the flag is false; an unbalanced box is
/// returned best-effort to end of string, also flagged false.
pub fn extract_boxed(completion: &str) -> (String, bool) {
    const MARKER: &str = "\\boxed{";
    let Some(start) = completion.rfind(MARKER) else {
        return (completion.trim().to_string(), false);
    };
    let body = &completion[start + MARKER.len()..];
    let mut depth = 1usize;
    for (i, ch) in body.char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return (body[..i].to_string(), true);
                }
            }
            _ => {}
        }
    }
    (body.to_string(), false)
}

static ARTICLES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(a|an|the)\b").unwrap());

/// SQuAD-style normalization: lowercase, strip punctuation, drop the
/// articles a/an/the, collapse whitespace. Idempotent.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    let no_articles = ARTICLES.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Equivalence under [`normalize`]: symmetric by construction.
pub fn is_equiv(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

/// Max-equivalence reward: 1 when any ground truth is equivalent to the
/// prediction, else 0. `pred` is the already-extracted answer text.
pub fn reward_any_of(pred: &str, answers: &AnswerSet) -> RewardResult {
    debug_assert_eq!(answers.mode, AnswerMode::AnyOf);
    let norm_pred = normalize(pred);
    let matched: Vec<bool> = answers
        .answers
        .iter()
        .map(|y| normalize(y) == norm_pred)
        .collect();
    let hit = matched.iter().any(|&m| m);
    RewardResult {
        score: if hit { 1.0 } else { 0.0 },
        matched,
        extracted_answer: pred.to_string(),
        extraction_ok: true,
    }
}

/// Coverage reward: the fraction of ground truths contained in the
/// prediction after normalization. Purely numeric ground truths must match
/// on whole-token boundaries, so "123" does not count inside "1234".
pub fn reward_all_of(pred: &str, answers: &AnswerSet) -> RewardResult {
    debug_assert_eq!(answers.mode, AnswerMode::AllOf);
    let norm_pred = normalize(pred);
    let matched: Vec<bool> = answers
        .answers
        .iter()
        .map(|y| contains_normalized(&norm_pred, &normalize(y)))
        .collect();
    let hits = matched.iter().filter(|&&m| m).count();
    RewardResult {
        score: hits as f64 / answers.answers.len() as f64,
        matched,
        extracted_answer: pred.to_string(),
        extraction_ok: true,
    }
}

/// Score under the set's own mode.
pub fn reward(pred: &str, answers: &AnswerSet) -> RewardResult {
    match answers.mode {
        AnswerMode::AnyOf => reward_any_of(pred, answers),
        AnswerMode::AllOf => reward_all_of(pred, answers),
    }
}

/// Extract the boxed answer from a raw completion and score it.
pub fn score_completion(completion: &str, answers: &AnswerSet) -> RewardResult {
    let (answer, extraction_ok) = extract_boxed(completion);
    let mut result = reward(&answer, answers);
    result.extraction_ok = extraction_ok;
    result
}

/// Substring containment on normalized text. `needle` is assumed already
/// normalized and non-empty callers aside; numeric needles additionally
/// require non-alphanumeric (or edge) flanks.
fn contains_normalized(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let numeric = needle.chars().all(|c| c.is_ascii_digit());
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        if !numeric {
            return true;
        }
        let left_ok = start == 0
            || !haystack[..start]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric());
        let right_ok = end == haystack.len()
            || !haystack[end..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric());
        if left_ok && right_ok {
            return true;
        }
        from = start + needle.len().max(1);
    }
    false
}

/// True when an `any_of` miss would become a hit if both sides were read as
/// numbers. Scoring stays strictly textual; reports surface these so that
/// answers like "4 million" vs "4000000" are visible rather than silently
/// wrong.
pub fn numeric_near_miss(pred: &str, answers: &AnswerSet) -> bool {
    let Some(pred_value) = parse_numeric(pred) else {
        return false;
    };
    answers
        .answers
        .iter()
        .any(|y| !is_equiv(y, pred) && parse_numeric(y) == Some(pred_value))
}

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d+(?:\.\d+)?)(?: (thousand|million|billion|k|m|bn?))?$").unwrap()
});

/// Read a whole answer as a number, honoring digit grouping and magnitude
/// words. Returns `None` for anything that is not purely numeric.
fn parse_numeric(text: &str) -> Option<f64> {
    // "4,000,000" normalizes to "4 000 000"; re-join grouped digit runs.
    let mut compact = String::new();
    for word in normalize(text).split_whitespace() {
        let grouped = word.len() == 3
            && word.chars().all(|c| c.is_ascii_digit())
            && compact.chars().next_back().is_some_and(|c| c.is_ascii_digit());
        if !compact.is_empty() && !grouped {
            compact.push(' ');
        }
        compact.push_str(word);
    }
    let caps = NUMERIC.captures(&compact)?;
    let base: f64 = caps[1].parse().ok()?;
    let scale = match caps.get(2).map(|m| m.as_str()) {
        None => 1.0,
        Some("thousand") | Some("k") => 1e3,
        Some("million") | Some("m") => 1e6,
        Some("billion") | Some("b") | Some("bn") => 1e9,
        Some(_) => return None,
    };
    Some(base * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extract_boxed_basic() {
        assert_eq!(extract_boxed("thus \\boxed{42}"), ("42".to_string(), true));
        assert_eq!(
            extract_boxed("no box here"),
            ("no box here".to_string(), false)
        );
    }

    #[test]
    fn extract_boxed_last_opening_wins() {
        assert_eq!(
            extract_boxed("\\boxed{a\\boxed{b}}"),
            ("b".to_string(), true)
        );
        assert_eq!(
            extract_boxed("\\boxed{1} and \\boxed{2}"),
            ("2".to_string(), true)
        );
    }

    #[test]
    fn extract_boxed_unbalanced_best_effort() {
        assert_eq!(
            extract_boxed("\\boxed{oops"),
            ("oops".to_string(), false)
        );
        assert_eq!(
            extract_boxed("\\boxed{a{b}"),
            ("a{b}".to_string(), false)
        );
    }

    #[test]
    fn extract_boxed_nested_balanced() {
        assert_eq!(
            extract_boxed("\\boxed{a{b}c}"),
            ("a{b}c".to_string(), true)
        );
    }

    #[test]
    fn any_of_case_punct_space_insensitive() {
        let y = AnswerSet::any_of(["Greenwich Village, New York City"]);
        assert_eq!(
            reward_any_of("Greenwich Village, New York City", &y).score,
            1.0
        );
        assert_eq!(
            reward_any_of("greenwich village,  new york city.", &y).score,
            1.0
        );
        assert_eq!(reward_any_of("Brooklyn", &y).score, 0.0);
    }

    #[test]
    fn any_of_strips_articles() {
        let y = AnswerSet::any_of(["the Eiffel Tower"]);
        assert_eq!(reward_any_of("Eiffel Tower", &y).score, 1.0);
    }

    #[test]
    fn all_of_is_exact_fraction() {
        let y = AnswerSet::all_of(["1234567", "7654321"]);
        let r = reward_all_of("I saw 1234567 somewhere", &y);
        assert_eq!(r.score, 0.5);
        assert_eq!(r.matched, vec![true, false]);
        assert_eq!(
            reward_all_of("both 1234567 and 7654321 appear", &y).score,
            1.0
        );
        assert_eq!(reward_all_of("", &y).score, 0.0);
    }

    #[test]
    fn numeric_answers_need_token_boundaries() {
        let y = AnswerSet::all_of(["123"]);
        assert_eq!(reward_all_of("value 1234 here", &y).score, 0.0);
        assert_eq!(reward_all_of("value 123 here", &y).score, 1.0);
        assert_eq!(reward_all_of("(123)", &y).score, 1.0);
    }

    #[test]
    fn near_miss_detection() {
        let y = AnswerSet::any_of(["4000000"]);
        assert!(numeric_near_miss("4 million", &y));
        assert!(numeric_near_miss("4,000,000", &y));
        assert!(!numeric_near_miss("4000000", &y)); // an actual hit, not a near miss
        assert!(!numeric_near_miss("five", &y));
        assert!(!numeric_near_miss("3 million", &y));
    }

    #[test]
    fn score_completion_extracts_then_scores() {
        let y = AnswerSet::any_of(["42"]);
        let r = score_completion("after some thought, \\boxed{42}", &y);
        assert_eq!(r.score, 1.0);
        assert!(r.extraction_ok);
        // Without a box the whole trimmed completion is the answer, which is
        // not equivalent to "42" as a string.
        let r = score_completion("it is 42", &y);
        assert_eq!(r.score, 0.0);
        assert!(!r.extraction_ok);
        let r = score_completion("42", &y);
        assert_eq!(r.score, 1.0);
        assert!(!r.extraction_ok);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(s in ".{0,120}") {
            prop_assert_eq!(normalize(&normalize(&s)), normalize(&s));
        }

        #[test]
        fn is_equiv_symmetric(a in ".{0,60}", b in ".{0,60}") {
            prop_assert_eq!(is_equiv(&a, &b), is_equiv(&b, &a));
        }

        #[test]
        fn all_of_monotone_in_appended_truths(
            pred in "[a-z0-9 ]{0,40}",
            extra in "[a-z0-9]{1,10}",
        ) {
            let y = AnswerSet::all_of(["777"]);
            let base = reward_all_of(&pred, &y);
            let longer = format!("{pred} {extra} 777");
            let after = reward_all_of(&longer, &y);
            prop_assert!(after.score >= base.score);
        }

        #[test]
        fn any_of_is_binary(pred in ".{0,60}") {
            let y = AnswerSet::any_of(["alpha", "beta"]);
            let r = reward_any_of(&pred, &y);
            prop_assert!(r.score == 0.0 || r.score == 1.0);
        }
    }
}
