//! Deterministic scripted models.
//!
//! A mock is a pure function of `(behavior, seed, prompt)`; equal inputs
//! always produce byte-identical completions, which makes every downstream
//! trace reproducible and hashable. The extractor behaviors emulate an ideal
//! reader of the synthetic task formats: they pull needle sentences and
//! variable assignments out of the current section into memory and answer
//! from memory alone.

use std::collections::HashMap;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use regex::Regex;

use super::{Completion, Gateway, GatewayError, GatewayStats, InFlightGauge};
use crate::workflow::prompt::{parse_rendered_prompt, PromptSections, EMPTY_MEMORY_SENTINEL};

static MAGIC_NEEDLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"One of the special magic numbers for (\S+) is: (\d+)").unwrap()
});
static VAR_ASSIGN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"VAR ([A-Z]+) = ([A-Z0-9]+)").unwrap());

/// What the scripted model does with each prompt.
#[derive(Debug, Clone)]
pub enum MockBehavior {
    /// Always return the `<memory>` section verbatim.
    EchoMemory,
    /// Copy needle sentences relevant to the problem into memory; answer
    /// with every value retained so far.
    PerfectExtractor,
    /// Like [`MockBehavior::PerfectExtractor`] but also retains all variable
    /// assignments and resolves multi-hop chains at answer time.
    KHopExtractor,
    /// Wrap another behavior, dropping its memory updates with probability
    /// `p_drop` (decided deterministically from seed and prompt).
    Lossy {
        p_drop: f64,
        inner: Box<MockBehavior>,
    },
    /// Always return the given text.
    FixedAnswer(String),
    /// Look completions up from a recorded (prompt, completion) table.
    Replay(HashMap<String, String>),
}

/// A behavior plus the seed that fixes all of its random choices.
#[derive(Debug, Clone)]
pub struct MockScript {
    pub behavior: MockBehavior,
    pub seed: u64,
}

impl MockScript {
    pub fn new(behavior: MockBehavior, seed: u64) -> Self {
        MockScript { behavior, seed }
    }

    pub fn echo_memory() -> Self {
        MockScript::new(MockBehavior::EchoMemory, 0)
    }

    pub fn perfect_extractor() -> Self {
        MockScript::new(MockBehavior::PerfectExtractor, 0)
    }

    pub fn k_hop_extractor() -> Self {
        MockScript::new(MockBehavior::KHopExtractor, 0)
    }

    pub fn lossy(p_drop: f64, seed: u64) -> Self {
        MockScript::new(
            MockBehavior::Lossy {
                p_drop,
                inner: Box::new(MockBehavior::PerfectExtractor),
            },
            seed,
        )
    }

    pub fn fixed_answer(text: impl Into<String>) -> Self {
        MockScript::new(MockBehavior::FixedAnswer(text.into()), 0)
    }

    pub fn replay<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        MockScript::new(MockBehavior::Replay(pairs.into_iter().collect()), 0)
    }

    /// Completion text for `prompt`. Pure and deterministic.
    pub fn respond(&self, prompt: &str) -> Result<String, GatewayError> {
        respond_with(&self.behavior, self.seed, prompt)
    }
}

fn respond_with(
    behavior: &MockBehavior,
    seed: u64,
    prompt: &str,
) -> Result<String, GatewayError> {
    let sections = parse_rendered_prompt(prompt);
    match behavior {
        MockBehavior::EchoMemory => Ok(sections
            .map(|s| s.memory)
            .unwrap_or_else(|| prompt.to_string())),
        MockBehavior::PerfectExtractor => Ok(extractor_turn(sections, prompt, false)),
        MockBehavior::KHopExtractor => Ok(extractor_turn(sections, prompt, true)),
        MockBehavior::Lossy { p_drop, inner } => {
            let is_update = sections.as_ref().is_some_and(|s| s.chunk.is_some());
            if is_update && drop_decision(seed, prompt, *p_drop) {
                // Pretend the model saw nothing useful in this section.
                respond_with(&MockBehavior::EchoMemory, seed, prompt)
            } else {
                respond_with(inner, seed, prompt)
            }
        }
        MockBehavior::FixedAnswer(text) => Ok(text.clone()),
        MockBehavior::Replay(table) => table
            .get(prompt)
            .cloned()
            .ok_or(GatewayError::ReplayMiss),
    }
}

/// Deterministic coin flip in `[0, 1)` from the script seed and the prompt.
fn drop_decision(seed: u64, prompt: &str, p_drop: f64) -> bool {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in prompt.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3);
        h ^= h >> 31;
    }
    // splitmix finisher
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    unit < p_drop
}

fn extractor_turn(sections: Option<PromptSections>, prompt: &str, k_hop: bool) -> String {
    let Some(sections) = sections else {
        return prompt.to_string();
    };
    let retained = memory_lines(&sections.memory);
    match &sections.chunk {
        Some(chunk) => {
            let mut lines = retained;
            for sentence in sentences(chunk) {
                if is_relevant(&sentence, &sections.problem, k_hop)
                    && !lines.iter().any(|l| l == &sentence)
                {
                    lines.push(sentence);
                }
            }
            if lines.is_empty() {
                EMPTY_MEMORY_SENTINEL.to_string()
            } else {
                lines.join("\n")
            }
        }
        None => answer_from_memory(&sections.problem, &retained, k_hop),
    }
}

fn memory_lines(memory: &str) -> Vec<String> {
    if memory.trim() == EMPTY_MEMORY_SENTINEL {
        return Vec::new();
    }
    memory
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?' | '\n') {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

fn is_relevant(sentence: &str, problem: &str, k_hop: bool) -> bool {
    if let Some(cap) = MAGIC_NEEDLE.captures(sentence) {
        return problem.contains(&cap[1]);
    }
    if let Some(cap) = VAR_ASSIGN.captures(sentence) {
        if k_hop {
            return true;
        }
        // Direct assignment of a value the problem asks about.
        return problem.contains(&cap[2]);
    }
    // Fallback for prose: require two rare problem terms.
    let terms: Vec<&str> = problem
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() >= 5)
        .collect();
    let lower = sentence.to_lowercase();
    terms
        .iter()
        .filter(|t| lower.contains(&t.to_lowercase()))
        .count()
        >= 2
}

fn answer_from_memory(problem: &str, lines: &[String], k_hop: bool) -> String {
    let mut values: Vec<String> = Vec::new();
    for line in lines {
        for cap in MAGIC_NEEDLE.captures_iter(line) {
            if problem.contains(&cap[1]) && !values.contains(&cap[2].to_string()) {
                values.push(cap[2].to_string());
            }
        }
    }
    if k_hop {
        for name in reachable_variables(problem, lines) {
            if !values.contains(&name) {
                values.push(name);
            }
        }
    } else {
        for line in lines {
            for cap in VAR_ASSIGN.captures_iter(line) {
                if problem.contains(&cap[2]) && !values.contains(&cap[1].to_string()) {
                    values.push(cap[1].to_string());
                }
            }
        }
    }
    if values.is_empty() {
        "\\boxed{unknown}".to_string()
    } else {
        format!("\\boxed{{{}}}", values.join(", "))
    }
}

/// Variables transitively assigned a value mentioned in the problem,
/// resolved over all retained assignments regardless of statement order.
fn reachable_variables(problem: &str, lines: &[String]) -> Vec<String> {
    let assigns: Vec<(String, String)> = lines
        .iter()
        .flat_map(|l| VAR_ASSIGN.captures_iter(l))
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .collect();
    let mut known: Vec<String> = Vec::new();
    loop {
        let mut grew = false;
        for (name, rhs) in &assigns {
            let rooted = rhs.chars().all(|c| c.is_ascii_digit()) && problem.contains(rhs.as_str());
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

/// In-process gateway backed by a [`MockScript`].
pub struct MockGateway {
    script: MockScript,
    gauge: InFlightGauge,
    synthetic_delay: Option<Duration>,
}

impl MockGateway {
    pub fn new(script: MockScript) -> Self {
        MockGateway {
            script,
            gauge: InFlightGauge::new(usize::MAX),
            synthetic_delay: None,
        }
    }

    pub fn with_max_in_flight(script: MockScript, max_in_flight: usize) -> Self {
        MockGateway {
            script,
            gauge: InFlightGauge::new(max_in_flight),
            synthetic_delay: None,
        }
    }

    /// Add an artificial per-call delay; used by concurrency stress tests.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.synthetic_delay = Some(delay);
        self
    }
}

impl Gateway for MockGateway {
    fn complete(&self, prompt: &str, _max_output_tokens: usize) -> Result<Completion, GatewayError> {
        let _permit = self.gauge.enter();
        let start = Instant::now();
        if let Some(delay) = self.synthetic_delay {
            std::thread::sleep(delay);
        }
        let text = self.script.respond(prompt)?;
        let mut completion = Completion::from_text(text);
        completion.latency_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(completion)
    }

    fn stats(&self) -> GatewayStats {
        self.gauge.stats()
    }
}
