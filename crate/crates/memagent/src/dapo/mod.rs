//! Group-relative advantages and the multi-conversation clipped objective.
//!
//! A group is G episodes rolled out for the same sample. Each episode is
//! several context-independent conversations sharing one outcome reward. The
//! advantage is the episode reward minus the group mean (optionally divided
//! by the group std for the classic normalized variant), broadcast to every
//! token of every conversation of that episode. The objective averages the
//! clipped importance-weighted contributions and a per-token KL penalty over
//! one global token count spanning all conversations of all episodes.

mod export;
mod toy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{
    export_trajectories, read_trajectories, write_trajectories, ExportError, ScoredGroup,
    TrajectoryRecord,
};
pub use toy::{
    finite_difference_grad, toy_objective, toy_objective_grad, train_toy, CopyMemoryEnv,
    CurvePoint, LearningCurve, SoftmaxPolicy, ToyEpisode, ToyTrainConfig, ToyTrainError,
};

#[derive(Debug, Error)]
pub enum DapoError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("expected {expected} rewards for the group, got {got}")]
    WrongGroupSize { expected: usize, got: usize },
    #[error("degenerate group: all rewards equal, std normalization undefined")]
    DegenerateGroup,
    #[error("shape mismatch at episode {episode}, conversation {conversation}: {reason}")]
    ShapeMismatch {
        episode: usize,
        conversation: usize,
        reason: String,
    },
    #[error("non-finite logprob at episode {episode}, conversation {conversation}, token {token}")]
    NonFinite {
        episode: usize,
        conversation: usize,
        token: usize,
    },
}

/// Clipping, grouping, and KL settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DapoConfig {
    /// Episodes per group.
    pub group_size: usize,
    /// Lower clip bound offset: ratios below `1 - eps_low` are clipped.
    pub eps_low: f64,
    /// Upper clip bound offset: ratios above `1 + eps_high` are clipped.
    /// Asymmetric by default, allowing more upside than downside.
    pub eps_high: f64,
    /// KL penalty coefficient.
    pub kl_beta: f64,
    /// Divide advantages by the group reward std (the classic normalized
    /// variant). Off by default: mean-centering only.
    pub normalize_by_std: bool,
}

impl Default for DapoConfig {
    fn default() -> Self {
        DapoConfig {
            group_size: 16,
            eps_low: 0.2,
            eps_high: 0.28,
            kl_beta: 1e-3,
            normalize_by_std: false,
        }
    }
}

impl DapoConfig {
    pub fn validate(&self) -> Result<(), DapoError> {
        if self.group_size < 2 {
            return Err(DapoError::BadConfig("group_size must be >= 2".into()));
        }
        if !(self.eps_low > 0.0 && self.eps_low <= self.eps_high && self.eps_high < 1.0) {
            return Err(DapoError::BadConfig(
                "need 0 < eps_low <= eps_high < 1".into(),
            ));
        }
        if self.kl_beta < 0.0 || !self.kl_beta.is_finite() {
            return Err(DapoError::BadConfig("kl_beta must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-token logprobs for one conversation under the three policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTokens {
    pub token_ids: Vec<u32>,
    pub logprob_new: Vec<f64>,
    pub logprob_old: Vec<f64>,
    pub logprob_ref: Vec<f64>,
}

impl ConversationTokens {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// One episode: its conversations plus the single outcome reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTokens {
    pub conversations: Vec<ConversationTokens>,
    pub reward: f64,
}

/// G episodes rolled out for one sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupBatch {
    pub episodes: Vec<EpisodeTokens>,
}

impl GroupBatch {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn total_tokens(&self) -> usize {
        self.episodes
            .iter()
            .flat_map(|e| &e.conversations)
            .map(|c| c.len())
            .sum()
    }

    fn validate(&self) -> Result<(), DapoError> {
        for (ei, episode) in self.episodes.iter().enumerate() {
            for (ci, conv) in episode.conversations.iter().enumerate() {
                let n = conv.token_ids.len();
                if conv.logprob_new.len() != n
                    || conv.logprob_old.len() != n
                    || conv.logprob_ref.len() != n
                {
                    return Err(DapoError::ShapeMismatch {
                        episode: ei,
                        conversation: ci,
                        reason: format!(
                            "token_ids has {n} entries but logprobs have {}/{}/{}",
                            conv.logprob_new.len(),
                            conv.logprob_old.len(),
                            conv.logprob_ref.len()
                        ),
                    });
                }
                for t in 0..n {
                    if !conv.logprob_new[t].is_finite()
                        || !conv.logprob_old[t].is_finite()
                        || !conv.logprob_ref[t].is_finite()
                    {
                        return Err(DapoError::NonFinite {
                            episode: ei,
                            conversation: ci,
                            token: t,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// One scalar advantage per episode, shared by every token of every
/// conversation of that episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageTable {
    pub per_episode: Vec<f64>,
}

/// Group-relative advantages: reward minus group mean, optionally divided by
/// the group std.
pub fn compute_advantages(
    rewards: &[f64],
    config: &DapoConfig,
) -> Result<AdvantageTable, DapoError> {
    config.validate()?;
    if rewards.len() != config.group_size {
        return Err(DapoError::WrongGroupSize {
            expected: config.group_size,
            got: rewards.len(),
        });
    }
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let mut per_episode: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    if config.normalize_by_std {
        let variance = per_episode.iter().map(|d| d * d).sum::<f64>() / g;
        let std = variance.sqrt();
        if std == 0.0 {
            return Err(DapoError::DegenerateGroup);
        }
        for a in &mut per_episode {
            *a /= std;
        }
    }
    Ok(AdvantageTable { per_episode })
}

/// Per-token KL estimate `exp(d) - d - 1` with `d = logprob_ref -
/// logprob_new`; nonnegative, zero exactly when the policies agree.
pub fn kl_penalty(logprob_new: &[f64], logprob_ref: &[f64]) -> Result<Vec<f64>, DapoError> {
    if logprob_new.len() != logprob_ref.len() {
        return Err(DapoError::ShapeMismatch {
            episode: 0,
            conversation: 0,
            reason: format!(
                "logprob_new has {} entries, logprob_ref {}",
                logprob_new.len(),
                logprob_ref.len()
            ),
        });
    }
    logprob_new
        .iter()
        .zip(logprob_ref)
        .enumerate()
        .map(|(t, (lp_new, lp_ref))| {
            if !lp_new.is_finite() || !lp_ref.is_finite() {
                return Err(DapoError::NonFinite {
                    episode: 0,
                    conversation: 0,
                    token: t,
                });
            }
            let delta = lp_ref - lp_new;
            Ok(delta.exp() - delta - 1.0)
        })
        .collect()
}

/// Objective value plus its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    /// `(sum C - beta * sum KL) / total_tokens`.
    pub objective: f64,
    pub total_tokens: usize,
    /// Clipped importance-weighted contribution per episode/conv/token.
    pub contributions: Vec<Vec<Vec<f64>>>,
    /// Mean per-token KL estimate.
    pub mean_kl: f64,
}

/// Token-averaged clipped objective over the whole group.
///
/// Per token: `r = exp(lp_new - lp_old)`, contribution
/// `C = min(r * adv, clip(r, 1-eps_low, 1+eps_high) * adv)`; the final value
/// divides `sum(C) - beta * sum(KL)` by one global token count across every
/// conversation of every episode.
pub fn dapo_objective(
    batch: &GroupBatch,
    adv: &AdvantageTable,
    config: &DapoConfig,
) -> Result<ObjectiveValue, DapoError> {
    config.validate()?;
    batch.validate()?;
    if adv.per_episode.len() != batch.episodes.len() {
        return Err(DapoError::WrongGroupSize {
            expected: batch.episodes.len(),
            got: adv.per_episode.len(),
        });
    }

    let total_tokens = batch.total_tokens();
    if total_tokens == 0 {
        return Err(DapoError::BadConfig("batch contains no tokens".into()));
    }

    let lo = 1.0 - config.eps_low;
    let hi = 1.0 + config.eps_high;
    let mut clip_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut contributions = Vec::with_capacity(batch.episodes.len());

    for (episode, &advantage) in batch.episodes.iter().zip(&adv.per_episode) {
        let mut per_conv = Vec::with_capacity(episode.conversations.len());
        for conv in &episode.conversations {
            let kls = kl_penalty(&conv.logprob_new, &conv.logprob_ref)?;
            let mut per_token = Vec::with_capacity(conv.len());
            for t in 0..conv.len() {
                let ratio = (conv.logprob_new[t] - conv.logprob_old[t]).exp();
                let clipped = ratio.clamp(lo, hi);
                let c = (ratio * advantage).min(clipped * advantage);
                clip_sum += c;
                kl_sum += kls[t];
                per_token.push(c);
            }
            per_conv.push(per_token);
        }
        contributions.push(per_conv);
    }

    Ok(ObjectiveValue {
        objective: (clip_sum - config.kl_beta * kl_sum) / total_tokens as f64,
        total_tokens,
        contributions,
        mean_kl: kl_sum / total_tokens as f64,
    })
}
