//! Trainer-ready trajectory export.
//!
//! One JSONL record per conversation, carrying the scalar advantage of its
//! episode (identical across the episode's conversations) and the group id
//! the advantage was normalized within. Import is the exact inverse.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compute_advantages, DapoConfig, DapoError};
use crate::workflow::EpisodeTrace;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("group {group_id} has {episodes} episodes but {rewards} rewards")]
    UnscoredTrace {
        group_id: String,
        episodes: usize,
        rewards: usize,
    },
    #[error(transparent)]
    Dapo(#[from] DapoError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// A group of episodes for one sample, each scored with its outcome reward.
#[derive(Debug, Clone)]
pub struct ScoredGroup {
    pub group_id: String,
    pub episodes: Vec<EpisodeTrace>,
    pub rewards: Vec<f64>,
}

/// One exported conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub sample_id: String,
    pub conv_index: usize,
    pub prompt: String,
    pub completion: String,
    pub advantage: f64,
    pub reward: f64,
    pub group_id: String,
}

/// Flatten scored groups into trajectory records, computing group-relative
/// advantages with the given clipping config (its `group_size` is overridden
/// per group).
pub fn export_trajectories(
    groups: &[ScoredGroup],
    config: &DapoConfig,
) -> Result<Vec<TrajectoryRecord>, ExportError> {
    let mut records = Vec::new();
    for group in groups {
        if group.episodes.len() != group.rewards.len() {
            return Err(ExportError::UnscoredTrace {
                group_id: group.group_id.clone(),
                episodes: group.episodes.len(),
                rewards: group.rewards.len(),
            });
        }
        let group_config = DapoConfig {
            group_size: group.rewards.len(),
            ..config.clone()
        };
        let advantages = compute_advantages(&group.rewards, &group_config)?;
        for ((trace, &reward), &advantage) in group
            .episodes
            .iter()
            .zip(&group.rewards)
            .zip(&advantages.per_episode)
        {
            for (conv_index, conv) in trace.conversations.iter().enumerate() {
                records.push(TrajectoryRecord {
                    sample_id: trace.sample_id.clone(),
                    conv_index,
                    prompt: conv.prompt.clone(),
                    completion: conv.completion.clone(),
                    advantage,
                    reward,
                    group_id: group.group_id.clone(),
                });
            }
        }
    }
    Ok(records)
}

pub fn write_trajectories<W: Write>(
    writer: &mut W,
    records: &[TrajectoryRecord],
) -> Result<(), ExportError> {
    for record in records {
        let json = serde_json::to_string(record).map_err(|source| ExportError::Parse {
            line: 0,
            source,
        })?;
        writeln!(writer, "{json}")?;
    }
    Ok(())
}

pub fn read_trajectories<R: BufRead>(reader: R) -> Result<Vec<TrajectoryRecord>, ExportError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| ExportError::Parse {
            line: idx + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockScript};
    use crate::tokens::TokenCounter;
    use crate::workflow::{run_episode, Budgets, EpisodeInput};

    fn trace(id: &str, seed: u64) -> EpisodeTrace {
        let gateway = MockGateway::new(MockScript::lossy(0.4, seed));
        let counter = TokenCounter::whitespace();
        let needle = "One of the special magic numbers for brave-lion is: 4930211.";
        let context = format!(
            "{} {needle} {}",
            (0..9).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" "),
            (0..9).map(|i| format!("v{i}")).collect::<Vec<_>>().join(" "),
        );
        let input = EpisodeInput {
            sample_id: id.into(),
            question:
                "What is the special magic number for brave-lion mentioned in the provided text?"
                    .into(),
            context,
        };
        let budgets = Budgets {
            query: 64,
            chunk: 10,
            memory: 32,
            output: 64,
        };
        run_episode(&input, &gateway, &budgets, &counter).unwrap()
    }

    fn group(id: &str, n: usize) -> ScoredGroup {
        let episodes: Vec<EpisodeTrace> = (0..n).map(|i| trace(id, i as u64)).collect();
        let rewards: Vec<f64> = episodes
            .iter()
            .map(|t| if t.final_answer == "4930211" { 1.0 } else { 0.0 })
            .collect();
        ScoredGroup {
            group_id: id.to_string(),
            episodes,
            rewards,
        }
    }

    #[test]
    fn one_record_per_conversation_with_equal_advantage() {
        let g = group("g0", 4);
        let conv_total: usize = g.episodes.iter().map(|t| t.conversations.len()).sum();
        let records = export_trajectories(&[g], &DapoConfig::default()).unwrap();
        assert_eq!(records.len(), conv_total);
        // advantage constant within each episode
        for window in records.windows(2) {
            if window[0].sample_id == window[1].sample_id
                && window[0].conv_index < window[1].conv_index
            {
                assert_eq!(window[0].advantage, window[1].advantage);
            }
        }
    }

    #[test]
    fn group_advantages_sum_to_zero() {
        let g = group("g1", 4);
        let records = export_trajectories(&[g], &DapoConfig::default()).unwrap();
        // one advantage per episode: take conv_index 0 records
        let sum: f64 = records
            .iter()
            .filter(|r| r.conv_index == 0)
            .map(|r| r.advantage)
            .sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let records = export_trajectories(&[group("g2", 3)], &DapoConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &records).unwrap();
        let back = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(records, back);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.advantage.to_bits(), b.advantage.to_bits());
            assert_eq!(a.reward.to_bits(), b.reward.to_bits());
        }
    }

    #[test]
    fn unscored_group_is_an_error() {
        let mut g = group("g3", 3);
        g.rewards.pop();
        let err = export_trajectories(&[g], &DapoConfig::default()).unwrap_err();
        assert!(matches!(err, ExportError::UnscoredTrace { .. }));
    }

    #[test]
    fn single_episode_group_is_rejected() {
        let g = group("g4", 1);
        let err = export_trajectories(&[g], &DapoConfig::default()).unwrap_err();
        assert!(matches!(err, ExportError::Dapo(DapoError::BadConfig(_))));
    }
}
