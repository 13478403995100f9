//! The chunk → overwrite → answer episode driver.
//!
//! One episode streams a document through K memory-update conversations and
//! one answer conversation. The memory is ordinary text with a hard token
//! capacity: each update replaces it wholesale (never appends), and updates
//! that exceed the capacity are truncated with a flag. Every conversation is
//! context-independent; only the memory text carries state forward, so the
//! prompt window stays constant no matter how long the document is.

pub mod chunk;
pub mod prompt;
pub mod trace_io;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_document, ChunkError, ChunkPlan};
pub use prompt::{
    parse_rendered_prompt, render_answer_prompt, render_memory_prompt, template_overhead,
    EMPTY_MEMORY_SENTINEL,
};

use crate::gateway::{Gateway, GatewayError};
use crate::tokens::TokenCounter;
use crate::verify::extract_boxed;

/// Token budgets for one episode, mirroring the window split used during
/// training: query, document chunk, memory, and generated output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub query: usize,
    pub chunk: usize,
    pub memory: usize,
    pub output: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            query: 1024,
            chunk: 5000,
            memory: 1024,
            output: 1024,
        }
    }
}

/// Bounded plain-text memory between conversations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    pub text: String,
    pub token_count: usize,
    pub capacity: usize,
    pub truncated: bool,
}

impl MemoryState {
    /// The designated empty-memory sentinel.
    pub fn empty(capacity: usize, counter: &TokenCounter) -> Self {
        MemoryState {
            text: EMPTY_MEMORY_SENTINEL.to_string(),
            token_count: counter.count(EMPTY_MEMORY_SENTINEL),
            capacity,
            truncated: false,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.text == EMPTY_MEMORY_SENTINEL
    }

    /// Overwrite with `text`, hard-truncating at the capacity.
    pub fn overwrite(&self, text: &str, counter: &TokenCounter) -> Self {
        let (kept, truncated) = counter.truncate(text, self.capacity);
        MemoryState {
            token_count: counter.count(&kept),
            text: kept,
            capacity: self.capacity,
            truncated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationKind {
    MemoryUpdate,
    Answer,
}

/// One prompt/completion exchange inside an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub kind: ConversationKind,
    pub prompt: String,
    pub completion: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_token_ids: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_logprobs: Option<Vec<f64>>,
    /// Memory state after this turn; present on memory updates only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_after: Option<MemoryState>,
    pub wall_clock_ms: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Complete record of one episode: K memory updates then one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub sample_id: String,
    pub conversations: Vec<ConversationRecord>,
    /// Boxed answer extracted from the final conversation.
    pub final_answer: String,
}

impl EpisodeTrace {
    /// Number of memory-update conversations (K).
    pub fn memory_turns(&self) -> usize {
        self.conversations
            .iter()
            .filter(|c| c.kind == ConversationKind::MemoryUpdate)
            .count()
    }

    /// Raw completion of the answer conversation.
    pub fn answer_completion(&self) -> Option<&str> {
        self.conversations
            .iter()
            .rev()
            .find(|c| c.kind == ConversationKind::Answer)
            .map(|c| c.completion.as_str())
    }

    /// Structural invariants: exactly one answer conversation, last, and
    /// every memory-update carries a within-capacity memory.
    pub fn check_shape(&self) -> Result<(), String> {
        let answers = self
            .conversations
            .iter()
            .filter(|c| c.kind == ConversationKind::Answer)
            .count();
        if answers != 1 {
            return Err(format!("expected exactly 1 answer conversation, got {answers}"));
        }
        match self.conversations.last() {
            Some(last) if last.kind == ConversationKind::Answer => {}
            _ => return Err("answer conversation is not last".into()),
        }
        for (i, conv) in self.conversations.iter().enumerate() {
            if conv.kind == ConversationKind::MemoryUpdate {
                match &conv.memory_after {
                    Some(mem) if mem.token_count <= mem.capacity => {}
                    Some(mem) => {
                        return Err(format!(
                            "turn {i}: memory {} tokens exceeds capacity {}",
                            mem.token_count, mem.capacity
                        ))
                    }
                    None => return Err(format!("turn {i}: memory update without memory_after")),
                }
            }
        }
        Ok(())
    }
}

/// The inputs an episode needs from a task instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeInput {
    pub sample_id: String,
    pub question: String,
    pub context: String,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("query is {tokens} tokens, exceeding the query budget {budget}")]
    QueryTooLong { tokens: usize, budget: usize },
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error("gateway failed at turn {turn_index} ({completed} conversations completed): {source}")]
    Gateway {
        turn_index: usize,
        completed: usize,
        partial: Vec<ConversationRecord>,
        source: GatewayError,
    },
}

/// Run one episode: chunk the context, stream it through memory updates,
/// then answer from the final memory.
pub fn run_episode(
    input: &EpisodeInput,
    gateway: &dyn Gateway,
    budgets: &Budgets,
    counter: &TokenCounter,
) -> Result<EpisodeTrace, EpisodeError> {
    let query_tokens = counter.count(&input.question);
    if query_tokens > budgets.query {
        return Err(EpisodeError::QueryTooLong {
            tokens: query_tokens,
            budget: budgets.query,
        });
    }

    let plan = chunk_document(&input.context, budgets.chunk, counter)?;
    let mut memory = MemoryState::empty(budgets.memory, counter);
    let mut conversations: Vec<ConversationRecord> = Vec::with_capacity(plan.len() + 1);

    for (turn_index, chunk_text) in plan.chunks.iter().enumerate() {
        let prompt = render_memory_prompt(&input.question, &memory.text, chunk_text);
        debug_assert!(
            counter.count(&prompt)
                <= budgets.query
                    + budgets.chunk
                    + budgets.memory
                    + prompt::template_overhead(counter, false),
            "memory prompt exceeds the constant window"
        );
        let warnings = prompt::tag_collisions(&input.question, &memory.text, Some(chunk_text));
        let started = Instant::now();
        let completion = gateway
            .complete(&prompt, budgets.output)
            .map_err(|source| EpisodeError::Gateway {
                turn_index,
                completed: conversations.len(),
                partial: conversations.clone(),
                source,
            })?;
        memory = memory.overwrite(&completion.text, counter);
        conversations.push(ConversationRecord {
            kind: ConversationKind::MemoryUpdate,
            prompt,
            completion: completion.text,
            completion_token_ids: completion.token_ids,
            completion_logprobs: completion.logprobs,
            memory_after: Some(memory.clone()),
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
            warnings,
        });
    }

    let prompt = render_answer_prompt(&input.question, &memory.text);
    debug_assert!(
        counter.count(&prompt)
            <= budgets.query + budgets.memory + prompt::template_overhead(counter, true),
        "answer prompt exceeds the constant window"
    );
    let warnings = prompt::tag_collisions(&input.question, &memory.text, None);
    let started = Instant::now();
    let completion =
        gateway
            .complete(&prompt, budgets.output)
            .map_err(|source| EpisodeError::Gateway {
                turn_index: plan.len(),
                completed: conversations.len(),
                partial: conversations.clone(),
                source,
            })?;
    let (final_answer, _) = extract_boxed(&completion.text);
    conversations.push(ConversationRecord {
        kind: ConversationKind::Answer,
        prompt,
        completion: completion.text,
        completion_token_ids: completion.token_ids,
        completion_logprobs: completion.logprobs,
        memory_after: None,
        wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
        warnings,
    });

    Ok(EpisodeTrace {
        sample_id: input.sample_id.clone(),
        conversations,
        final_answer,
    })
}

/// Run episodes for many inputs on a bounded worker pool. Results come back
/// in input order; per-episode failures are reported individually so one bad
/// instance never aborts the batch.
pub fn run_episodes(
    inputs: &[EpisodeInput],
    gateway: &dyn Gateway,
    budgets: &Budgets,
    counter: &TokenCounter,
    concurrency: usize,
) -> Vec<Result<EpisodeTrace, EpisodeError>> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let concurrency = concurrency.max(1).min(inputs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<EpisodeTrace, EpisodeError>>>> =
        (0..inputs.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..concurrency {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= inputs.len() {
                    break;
                }
                let outcome = run_episode(&inputs[i], gateway, budgets, counter);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    results
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}
