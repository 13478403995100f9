//! Desk-scale gradient oracle: a tabular softmax policy on a copy-memory
//! game with the same multi-conversation episode structure as the real
//! workflow. One conversation writes a symbol into memory, optional middle
//! conversations rewrite it, and a final conversation answers from memory
//! alone. The analytic policy gradient of the clipped objective is checked
//! against central finite differences, and plain gradient ascent learns the
//! task from chance level.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    compute_advantages, dapo_objective, AdvantageTable, ConversationTokens, DapoConfig,
    EpisodeTokens, GroupBatch,
};

#[derive(Debug, Error)]
pub enum ToyTrainError {
    #[error("policy diverged (non-finite logits) at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Dapo(#[from] super::DapoError),
}

/// Tabular softmax policy over a small discrete state space.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    /// Row per state, column per vocabulary symbol.
    pub logits: Vec<Vec<f64>>,
    pub temperature: f64,
}

impl SoftmaxPolicy {
    pub fn zeros(num_states: usize, vocab: usize) -> Self {
        SoftmaxPolicy {
            logits: vec![vec![0.0; vocab]; num_states],
            temperature: 1.0,
        }
    }

    pub fn vocab(&self) -> usize {
        self.logits.first().map_or(0, |row| row.len())
    }

    pub fn is_finite(&self) -> bool {
        self.logits
            .iter()
            .all(|row| row.iter().all(|l| l.is_finite()))
    }

    /// Log-probabilities of one state's action distribution.
    pub fn log_softmax(&self, state: usize) -> Vec<f64> {
        let row = &self.logits[state];
        let scaled: Vec<f64> = row.iter().map(|l| l / self.temperature).collect();
        let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = scaled.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
        scaled.iter().map(|l| l - log_z).collect()
    }

    pub fn logprob(&self, state: usize, action: usize) -> f64 {
        self.log_softmax(state)[action]
    }

    pub fn sample(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        let probs: Vec<f64> = self.log_softmax(state).iter().map(|lp| lp.exp()).collect();
        let mut u: f64 = rng.gen();
        for (action, p) in probs.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return action;
            }
        }
        probs.len() - 1
    }
}

/// Copy-memory game: observe a symbol, carry it through `hops` memory
/// conversations, then answer it. States `0..num_symbols` are "observing
/// symbol x"; states `num_symbols..2*num_symbols` are "memory holds m".
#[derive(Debug, Clone, Copy)]
pub struct CopyMemoryEnv {
    pub num_symbols: usize,
    pub hops: usize,
}

impl Default for CopyMemoryEnv {
    fn default() -> Self {
        CopyMemoryEnv {
            num_symbols: 2,
            hops: 1,
        }
    }
}

impl CopyMemoryEnv {
    pub fn num_states(&self) -> usize {
        2 * self.num_symbols
    }

    pub fn fresh_policy(&self) -> SoftmaxPolicy {
        SoftmaxPolicy::zeros(self.num_states(), self.num_symbols)
    }

    fn observe_state(&self, symbol: usize) -> usize {
        symbol
    }

    fn memory_state(&self, written: usize) -> usize {
        self.num_symbols + written
    }

    /// Roll one episode for the given symbol: `hops` memory conversations
    /// followed by one answer conversation, each a single action.
    pub fn rollout(
        &self,
        policy: &SoftmaxPolicy,
        symbol: usize,
        rng: &mut ChaCha8Rng,
    ) -> ToyEpisode {
        let mut steps = Vec::with_capacity(self.hops + 1);
        let mut state = self.observe_state(symbol);
        for _ in 0..self.hops {
            let written = policy.sample(state, rng);
            steps.push(vec![(state, written)]);
            state = self.memory_state(written);
        }
        let answer = policy.sample(state, rng);
        steps.push(vec![(state, answer)]);
        ToyEpisode {
            steps,
            reward: if answer == symbol { 1.0 } else { 0.0 },
        }
    }
}

/// One toy episode: per conversation, the (state, action) tokens, plus the
/// outcome reward.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEpisode {
    pub steps: Vec<Vec<(usize, usize)>>,
    pub reward: f64,
}

/// Fixed per-token logprob tables for the old and reference policies,
/// aligned with the episode structure.
pub type LogprobTable = Vec<Vec<Vec<f64>>>;

fn logprob_table(policy: &SoftmaxPolicy, episodes: &[ToyEpisode]) -> LogprobTable {
    episodes
        .iter()
        .map(|e| {
            e.steps
                .iter()
                .map(|conv| {
                    conv.iter()
                        .map(|&(s, a)| policy.logprob(s, a))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Assemble a [`GroupBatch`] whose new-policy logprobs come from `policy`
/// and whose old/reference logprobs come from the given tables.
pub fn toy_group_batch(
    policy: &SoftmaxPolicy,
    episodes: &[ToyEpisode],
    lp_old: &LogprobTable,
    lp_ref: &LogprobTable,
) -> GroupBatch {
    let episodes = episodes
        .iter()
        .enumerate()
        .map(|(ei, e)| EpisodeTokens {
            conversations: e
                .steps
                .iter()
                .enumerate()
                .map(|(ci, conv)| ConversationTokens {
                    token_ids: conv.iter().map(|&(_, a)| a as u32).collect(),
                    logprob_new: conv.iter().map(|&(s, a)| policy.logprob(s, a)).collect(),
                    logprob_old: lp_old[ei][ci].clone(),
                    logprob_ref: lp_ref[ei][ci].clone(),
                })
                .collect(),
            reward: e.reward,
        })
        .collect();
    GroupBatch { episodes }
}

/// Objective value as a function of the policy, with everything else fixed.
pub fn toy_objective(
    policy: &SoftmaxPolicy,
    episodes: &[ToyEpisode],
    lp_old: &LogprobTable,
    lp_ref: &LogprobTable,
    adv: &AdvantageTable,
    config: &DapoConfig,
) -> Result<f64, super::DapoError> {
    let batch = toy_group_batch(policy, episodes, lp_old, lp_ref);
    Ok(dapo_objective(&batch, adv, config)?.objective)
}

/// Analytic gradient of [`toy_objective`] with respect to the policy logits.
///
/// Per token: the clipped contribution has derivative `r * adv` w.r.t. the
/// new logprob when the unclipped branch attains the min, zero otherwise;
/// the KL term contributes `-beta * (1 - exp(lp_ref - lp_new))`. Chain rule
/// through log-softmax spreads each token's derivative over its state row.
pub fn toy_objective_grad(
    policy: &SoftmaxPolicy,
    episodes: &[ToyEpisode],
    lp_old: &LogprobTable,
    lp_ref: &LogprobTable,
    adv: &AdvantageTable,
    config: &DapoConfig,
) -> Result<Vec<Vec<f64>>, super::DapoError> {
    config.validate()?;
    let total_tokens: usize = episodes
        .iter()
        .flat_map(|e| &e.steps)
        .map(|conv| conv.len())
        .sum();
    let mut grad = vec![vec![0.0; policy.vocab()]; policy.logits.len()];
    let lo = 1.0 - config.eps_low;
    let hi = 1.0 + config.eps_high;

    for (ei, episode) in episodes.iter().enumerate() {
        let advantage = adv.per_episode[ei];
        for (ci, conv) in episode.steps.iter().enumerate() {
            for (ti, &(state, action)) in conv.iter().enumerate() {
                let lp_new = policy.logprob(state, action);
                let ratio = (lp_new - lp_old[ei][ci][ti]).exp();
                let clipped = ratio.clamp(lo, hi);
                let unclipped_selected = ratio * advantage <= clipped * advantage;
                let dc_dlp = if unclipped_selected {
                    ratio * advantage
                } else {
                    0.0
                };
                let delta = lp_ref[ei][ci][ti] - lp_new;
                let dkl_dlp = 1.0 - delta.exp();
                let dj_dlp = (dc_dlp - config.kl_beta * dkl_dlp) / total_tokens as f64;

                let log_probs = policy.log_softmax(state);
                for (v, lp) in log_probs.iter().enumerate() {
                    let indicator = if v == action { 1.0 } else { 0.0 };
                    grad[state][v] += dj_dlp * (indicator - lp.exp()) / policy.temperature;
                }
            }
        }
    }
    Ok(grad)
}

/// Central finite differences of [`toy_objective`] over every logit entry.
pub fn finite_difference_grad(
    policy: &SoftmaxPolicy,
    episodes: &[ToyEpisode],
    lp_old: &LogprobTable,
    lp_ref: &LogprobTable,
    adv: &AdvantageTable,
    config: &DapoConfig,
    h: f64,
) -> Result<Vec<Vec<f64>>, super::DapoError> {
    let mut grad = vec![vec![0.0; policy.vocab()]; policy.logits.len()];
    for s in 0..policy.logits.len() {
        for v in 0..policy.vocab() {
            let mut plus = policy.clone();
            plus.logits[s][v] += h;
            let mut minus = policy.clone();
            minus.logits[s][v] -= h;
            let up = toy_objective(&plus, episodes, lp_old, lp_ref, adv, config)?;
            let down = toy_objective(&minus, episodes, lp_old, lp_ref, adv, config)?;
            grad[s][v] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_reward: f64,
    pub objective: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_reward,objective,kl\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.step, p.mean_reward, p.objective, p.kl
            ));
        }
        out
    }

    /// Mean reward over the last `n` recorded steps.
    pub fn trailing_mean_reward(&self, n: usize) -> f64 {
        let tail = &self.points[self.points.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|p| p.mean_reward).sum::<f64>() / tail.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ToyTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Samples (groups) rolled out per optimizer step; gradients accumulate
    /// across them, mirroring a rollout batch of `samples_per_step *
    /// group_size` episodes.
    pub samples_per_step: usize,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            steps: 500,
            learning_rate: 0.1,
            samples_per_step: 8,
            seed: 0,
        }
    }
}

/// Train the policy in place with plain gradient ascent on the clipped
/// objective: per step, a batch of samples each rolled out as one group,
/// on-policy (old = current) with the reference frozen at the start.
pub fn train_toy(
    env: &CopyMemoryEnv,
    policy: &mut SoftmaxPolicy,
    dapo: &DapoConfig,
    train: &ToyTrainConfig,
) -> Result<LearningCurve, ToyTrainError> {
    dapo.validate()?;
    let reference = policy.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut curve = LearningCurve::default();

    for step in 0..train.steps {
        let mut grad_total = vec![vec![0.0; policy.vocab()]; policy.logits.len()];
        let mut reward_sum = 0.0;
        let mut objective_sum = 0.0;
        let mut kl_sum = 0.0;
        let samples = train.samples_per_step.max(1);

        for _ in 0..samples {
            let symbol = rng.gen_range(0..env.num_symbols);
            let episodes: Vec<ToyEpisode> = (0..dapo.group_size)
                .map(|_| env.rollout(policy, symbol, &mut rng))
                .collect();
            let rewards: Vec<f64> = episodes.iter().map(|e| e.reward).collect();
            reward_sum += rewards.iter().sum::<f64>() / rewards.len() as f64;
            let adv = compute_advantages(&rewards, dapo)?;

            let lp_old = logprob_table(policy, &episodes);
            let lp_ref = logprob_table(&reference, &episodes);
            let batch = toy_group_batch(policy, &episodes, &lp_old, &lp_ref);
            let objective = dapo_objective(&batch, &adv, dapo)?;
            objective_sum += objective.objective;
            kl_sum += objective.mean_kl;
            let grad = toy_objective_grad(policy, &episodes, &lp_old, &lp_ref, &adv, dapo)?;
            for (total_row, grad_row) in grad_total.iter_mut().zip(&grad) {
                for (total, g) in total_row.iter_mut().zip(grad_row) {
                    *total += g;
                }
            }
        }

        for (row, grad_row) in policy.logits.iter_mut().zip(&grad_total) {
            for (logit, g) in row.iter_mut().zip(grad_row) {
                *logit += train.learning_rate * g;
            }
        }
        if !policy.is_finite() {
            return Err(ToyTrainError::Diverged { step });
        }
        curve.points.push(CurvePoint {
            step,
            mean_reward: reward_sum / samples as f64,
            objective: objective_sum / samples as f64,
            kl: kl_sum / samples as f64,
        });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(group: usize) -> DapoConfig {
        DapoConfig {
            group_size: group,
            ..Default::default()
        }
    }

    /// Random episodes with old/ref logprobs placed away from the clip
    /// boundaries so finite differences stay smooth.
    fn random_case(
        seed: u64,
        env: &CopyMemoryEnv,
    ) -> (
        SoftmaxPolicy,
        Vec<ToyEpisode>,
        LogprobTable,
        LogprobTable,
        AdvantageTable,
        DapoConfig,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut policy = env.fresh_policy();
        for row in &mut policy.logits {
            for l in row.iter_mut() {
                *l = rng.gen_range(-1.0..1.0);
            }
        }
        let group = 2 + (seed as usize % 3);
        let config = tiny_config(group);
        let episodes: Vec<ToyEpisode> = (0..group)
            .map(|_| {
                let symbol = rng.gen_range(0..env.num_symbols);
                env.rollout(&policy, symbol, &mut rng)
            })
            .collect();
        let adv = compute_advantages(
            &episodes.iter().map(|e| e.reward).collect::<Vec<_>>(),
            &config,
        )
        .unwrap_or(AdvantageTable {
            per_episode: vec![0.5; group],
        });

        // Target ratios in smooth regions on both sides of the clip window.
        let ratio_pool: [f64; 8] = [0.5, 0.7, 0.9, 1.0, 1.1, 1.2, 1.6, 2.0];
        let lp_new = logprob_table(&policy, &episodes);
        let lp_old: LogprobTable = lp_new
            .iter()
            .map(|e| {
                e.iter()
                    .map(|conv| {
                        conv.iter()
                            .map(|lp| {
                                let r = ratio_pool[rng.gen_range(0..ratio_pool.len())];
                                lp - r.ln()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let lp_ref: LogprobTable = lp_new
            .iter()
            .map(|e| {
                e.iter()
                    .map(|conv| {
                        conv.iter()
                            .map(|lp| lp + rng.gen_range(-0.3..0.3))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (policy, episodes, lp_old, lp_ref, adv, config)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let env = CopyMemoryEnv {
            num_symbols: 3,
            hops: 2,
        };
        for seed in 0..25u64 {
            let (policy, episodes, lp_old, lp_ref, adv, config) = random_case(seed, &env);
            let analytic =
                toy_objective_grad(&policy, &episodes, &lp_old, &lp_ref, &adv, &config).unwrap();
            let numeric = finite_difference_grad(
                &policy, &episodes, &lp_old, &lp_ref, &adv, &config, 1e-5,
            )
            .unwrap();
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for (ra, rn) in analytic.iter().zip(&numeric) {
                for (a, n) in ra.iter().zip(rn) {
                    num += (a - n) * (a - n);
                    den += n * n;
                }
            }
            let rel = if den == 0.0 { num.sqrt() } else { (num / den).sqrt() };
            assert!(rel < 1e-4, "seed {seed}: relative gradient error {rel}");
        }
    }

    #[test]
    fn zero_learning_rate_leaves_policy_and_reward_flat() {
        let env = CopyMemoryEnv::default();
        let mut policy = env.fresh_policy();
        let before = policy.clone();
        let dapo = DapoConfig {
            group_size: 8,
            ..Default::default()
        };
        let train = ToyTrainConfig {
            steps: 100,
            learning_rate: 0.0,
            ..Default::default()
        };
        let curve = train_toy(&env, &mut policy, &dapo, &train).unwrap();
        assert_eq!(policy, before);
        let mean = curve.trailing_mean_reward(100);
        assert!((mean - 0.5).abs() < 0.15, "chance level drifted: {mean}");
    }

    #[test]
    fn learns_two_symbol_copy_within_500_steps() {
        let env = CopyMemoryEnv::default();
        let mut policy = env.fresh_policy();
        let dapo = DapoConfig {
            group_size: 8,
            ..Default::default()
        };
        let train = ToyTrainConfig::default();
        let curve = train_toy(&env, &mut policy, &dapo, &train).unwrap();
        let early: f64 = curve.points[..25].iter().map(|p| p.mean_reward).sum::<f64>() / 25.0;
        let late = curve.trailing_mean_reward(50);
        assert!((0.2..=0.8).contains(&early), "early reward {early} not near chance");
        assert!(late >= 0.9, "late reward {late} below 0.9");
    }

    #[test]
    fn all_zero_rewards_contribute_zero_gradient() {
        let env = CopyMemoryEnv::default();
        let policy = env.fresh_policy();
        let config = tiny_config(4);
        let episodes: Vec<ToyEpisode> = (0..4)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(9);
                let mut e = env.rollout(&policy, 0, &mut rng);
                e.reward = 0.0;
                e
            })
            .collect();
        let adv = compute_advantages(&[0.0; 4], &config).unwrap();
        let lp = logprob_table(&policy, &episodes);
        let grad =
            toy_objective_grad(&policy, &episodes, &lp, &lp, &adv, &config).unwrap();
        // beta * dKL is zero on-policy too, so the whole gradient vanishes.
        assert!(grad.iter().flatten().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn divergence_is_detected() {
        let env = CopyMemoryEnv::default();
        let mut policy = env.fresh_policy();
        policy.logits[0][0] = f64::INFINITY;
        let dapo = DapoConfig {
            group_size: 8,
            ..Default::default()
        };
        let train = ToyTrainConfig {
            steps: 3,
            ..Default::default()
        };
        let err = train_toy(&env, &mut policy, &dapo, &train).unwrap_err();
        assert!(matches!(err, ToyTrainError::Diverged { .. } | ToyTrainError::Dapo(_)));
    }

    #[test]
    fn log_softmax_normalizes() {
        let mut policy = SoftmaxPolicy::zeros(1, 4);
        policy.logits[0] = vec![0.3, -1.2, 2.0, 0.0];
        let lse: f64 = policy.log_softmax(0).iter().map(|lp| lp.exp()).sum();
        assert!((lse - 1.0).abs() < 1e-12);
    }
}

