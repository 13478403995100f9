//! Uniform access to chat-completion endpoints and deterministic mocks.
//!
//! A [`Gateway`] turns one prompt into one completion. The HTTP
//! implementation speaks the de-facto open chat-completions JSON shape (a
//! `messages` array with a single user turn per conversation); the mock
//! implementation is a pure function of `(script, seed, prompt)` and backs
//! every test in the workspace. Both enforce a global in-flight bound and
//! expose call statistics.

mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpGateway;
pub use mock::{MockBehavior, MockGateway, MockScript};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("http request failed after {attempts} attempts: {message}")]
    RequestFailed { attempts: u32, message: String },
    #[error("malformed response: {message}; raw body: {body}")]
    MalformedResponse { message: String, body: String },
    #[error("replay script has no completion recorded for this prompt")]
    ReplayMiss,
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("api key env var {0} is not set")]
    MissingApiKey(String),
}

/// One completion returned by a gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_ids: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    /// Wall-clock latency of the underlying call.
    #[serde(default)]
    pub latency_ms: f64,
}

impl Completion {
    pub fn from_text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            token_ids: None,
            logprobs: None,
            latency_ms: 0.0,
        }
    }
}

/// Retry policy for transient HTTP failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// First backoff; doubles per attempt.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 250,
        }
    }
}

/// Sampling parameters forwarded to the endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 1.0,
            top_p: 1.0,
            max_output_tokens: 1024,
        }
    }
}

/// Connection settings for a chat-completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub sampling: SamplingParams,
    /// Ask the endpoint for per-token logprobs (needed only for trajectory
    /// export).
    #[serde(default)]
    pub request_logprobs: bool,
    /// When set, every request/response pair is appended here as JSONL.
    #[serde(default)]
    pub audit_log: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".to_string(),
            model_name: "default".to_string(),
            api_key_env: "MEMAGENT_API_KEY".to_string(),
            max_in_flight: 8,
            timeout_ms: 120_000,
            retry: RetryPolicy::default(),
            sampling: SamplingParams::default(),
            request_logprobs: false,
            audit_log: None,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidConfig(
                "max_in_flight must be >= 1".into(),
            ));
        }
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidConfig("timeout_ms must be > 0".into()));
        }
        Ok(())
    }
}

/// Counters shared by all gateway implementations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewayStats {
    pub calls: usize,
    pub peak_in_flight: usize,
}

/// One prompt in, one completion out. Implementations are safe to share
/// across worker threads and enforce their in-flight bound internally.
pub trait Gateway: Send + Sync {
    /// Complete `prompt`, capping generation at `max_output_tokens`.
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<Completion, GatewayError>;

    /// Call and concurrency counters since construction.
    fn stats(&self) -> GatewayStats;
}

/// Counting semaphore that records the high-water mark of concurrent holders.
pub(crate) struct InFlightGauge {
    limit: usize,
    state: Mutex<usize>,
    freed: Condvar,
    calls: AtomicUsize,
    peak: AtomicUsize,
}

impl InFlightGauge {
    pub(crate) fn new(limit: usize) -> Self {
        InFlightGauge {
            limit: limit.max(1),
            state: Mutex::new(0),
            freed: Condvar::new(),
            calls: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }

    pub(crate) fn enter(&self) -> InFlightPermit<'_> {
        let mut active = self.state.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.peak.fetch_max(*active, Ordering::Relaxed);
        InFlightPermit { gauge: self }
    }

    pub(crate) fn stats(&self) -> GatewayStats {
        GatewayStats {
            calls: self.calls.load(Ordering::Relaxed),
            peak_in_flight: self.peak.load(Ordering::Relaxed),
        }
    }
}

pub(crate) struct InFlightPermit<'a> {
    gauge: &'a InFlightGauge,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut active = self.gauge.state.lock().unwrap();
        *active -= 1;
        self.gauge.freed.notify_one();
    }
}
