//! Trace serialization: one conversation per JSONL line.
//!
//! Wall-clock timings are deliberately not part of the wire format so that
//! two runs with the same inputs and the same deterministic gateway produce
//! byte-identical files. Timings live in sidecar reports instead.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConversationKind, ConversationRecord, EpisodeTrace, MemoryState};
use crate::verify::extract_boxed;

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace for sample {sample_id} is malformed: {reason}")]
    BadShape { sample_id: String, reason: String },
}

/// One serialized conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub sample_id: String,
    pub turn_index: usize,
    pub kind: ConversationKind,
    pub prompt: String,
    pub completion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_ids: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_after: Option<MemoryState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Flatten traces to JSONL lines in episode order.
pub fn trace_lines(traces: &[EpisodeTrace]) -> Vec<TraceLine> {
    traces
        .iter()
        .flat_map(|trace| {
            trace
                .conversations
                .iter()
                .enumerate()
                .map(move |(turn_index, conv)| TraceLine {
                    sample_id: trace.sample_id.clone(),
                    turn_index,
                    kind: conv.kind,
                    prompt: conv.prompt.clone(),
                    completion: conv.completion.clone(),
                    token_ids: conv.completion_token_ids.clone(),
                    logprobs: conv.completion_logprobs.clone(),
                    memory_after: conv.memory_after.clone(),
                    warnings: conv.warnings.clone(),
                })
        })
        .collect()
}

pub fn write_traces<W: Write>(writer: &mut W, traces: &[EpisodeTrace]) -> Result<(), TraceIoError> {
    for line in trace_lines(traces) {
        serde_json::to_writer(&mut *writer, &line).map_err(|source| TraceIoError::Parse {
            line: 0,
            source,
        })?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Read traces back, regrouping lines by sample id and ordering each episode
/// by turn index. Imported conversations carry zero wall-clock.
pub fn read_traces<R: BufRead>(reader: R) -> Result<Vec<EpisodeTrace>, TraceIoError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_sample: std::collections::HashMap<String, Vec<TraceLine>> =
        std::collections::HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(&line).map_err(|source| TraceIoError::Parse {
                line: idx + 1,
                source,
            })?;
        if !by_sample.contains_key(&parsed.sample_id) {
            order.push(parsed.sample_id.clone());
        }
        by_sample.entry(parsed.sample_id.clone()).or_default().push(parsed);
    }

    let mut traces = Vec::with_capacity(order.len());
    for sample_id in order {
        let mut lines = by_sample.remove(&sample_id).unwrap();
        lines.sort_by_key(|l| l.turn_index);
        let conversations: Vec<ConversationRecord> = lines
            .into_iter()
            .map(|l| ConversationRecord {
                kind: l.kind,
                prompt: l.prompt,
                completion: l.completion,
                completion_token_ids: l.token_ids,
                completion_logprobs: l.logprobs,
                memory_after: l.memory_after,
                wall_clock_ms: 0.0,
                warnings: l.warnings,
            })
            .collect();
        let final_answer = conversations
            .iter()
            .rev()
            .find(|c| c.kind == ConversationKind::Answer)
            .map(|c| extract_boxed(&c.completion).0)
            .unwrap_or_default();
        let trace = EpisodeTrace {
            sample_id: sample_id.clone(),
            conversations,
            final_answer,
        };
        trace.check_shape().map_err(|reason| TraceIoError::BadShape {
            sample_id,
            reason,
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

/// Canonical serialization of one trace with timings stripped; equal bytes
/// mean equal content.
pub fn canonical_trace_bytes(trace: &EpisodeTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_traces(&mut buf, std::slice::from_ref(trace)).expect("in-memory write");
    buf
}
