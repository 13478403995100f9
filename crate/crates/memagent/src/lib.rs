//! Harness for driving long documents through a fixed-size overwrite memory.
//!
//! A document is streamed chunk-by-chunk through an LLM endpoint. After each
//! chunk the model rewrites a bounded plain-text memory; once the stream is
//! exhausted a final conversation answers the original question from the
//! memory alone. Because the memory never grows, the context window stays
//! constant and total cost is linear in document length.
//!
//! The crate bundles everything needed to exercise and train that loop at
//! desk scale:
//!
//! - [`workflow`] — the chunk → overwrite → answer episode driver.
//! - [`gateway`] — HTTP chat-completion client plus deterministic scripted
//!   mocks used by every test.
//! - [`tasks`] — synthetic long-context task generators (needle retrieval,
//!   variable tracking, frequent words, QA haystacks) with length control.
//! - [`verify`] — boxed-answer extraction and rule-based rewards.
//! - [`dapo`] — group-relative advantages, the clipped multi-conversation
//!   token objective with KL penalty, a toy softmax-policy trainer, and
//!   trajectory export for external RL trainers.
//! - [`cost`] — dense-decoder FLOP accounting comparing full-context decoding
//!   against the staged workflow.

pub mod cost;
pub mod dapo;
pub mod gateway;
pub mod tasks;
pub mod tokens;
pub mod verify;
pub mod workflow;

pub use gateway::{Completion, EndpointConfig, Gateway, GatewayError, HttpGateway, MockGateway};
pub use tasks::{LengthSchedule, TaskFamily, TaskInstance};
pub use tokens::TokenCounter;
pub use verify::{AnswerMode, AnswerSet, RewardResult};
pub use workflow::{Budgets, ChunkPlan, ConversationKind, EpisodeTrace, MemoryState};
