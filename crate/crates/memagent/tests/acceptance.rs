//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test -p memagent --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memagent::dapo::{
    compute_advantages, export_trajectories, finite_difference_grad, read_trajectories,
    toy_objective_grad, train_toy, write_trajectories, CopyMemoryEnv, DapoConfig, ScoredGroup,
    ToyTrainConfig,
};
use memagent::gateway::{Gateway, MockGateway, MockScript};
use memagent::tasks::{
    build_qa_haystack, count_top_k, gen_freq_words, gen_niah, gen_variable_tracking,
    reachable_from_root, CorpusArticle, FreqWordsSpec, LengthSchedule, NiahSpec, QaSpec,
    TaskFamily, TaskInstance, VariableTrackingSpec,
};
use memagent::tokens::TokenCounter;
use memagent::verify::{reward_all_of, reward_any_of, AnswerSet};
use memagent::workflow::{
    chunk_document, run_episode, Budgets, ConversationKind, EpisodeInput,
};

fn pass(n: usize, title: &str) {
    println!("ACCEPTANCE {n} ({title}): PASS");
}

// --- 1. Gradient fidelity ---------------------------------------------------

#[test]
fn criterion_1_gradient_fidelity() {
    let started = Instant::now();
    let env = CopyMemoryEnv {
        num_symbols: 3,
        hops: 2,
    };
    let h = 1e-5;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xACC);
        let mut policy = env.fresh_policy();
        for row in &mut policy.logits {
            for l in row.iter_mut() {
                *l = rng.gen_range(-1.0..1.0);
            }
        }
        let group = 2 + (seed as usize % 3);
        let config = DapoConfig {
            group_size: group,
            ..Default::default()
        };
        let episodes: Vec<_> = (0..group)
            .map(|_| {
                let symbol = rng.gen_range(0..env.num_symbols);
                env.rollout(&policy, symbol, &mut rng)
            })
            .collect();
        let rewards: Vec<f64> = episodes.iter().map(|e| e.reward).collect();
        let adv = compute_advantages(&rewards, &config).unwrap();

        // Old/ref logprobs shifted to ratios away from the clip kinks so the
        // objective is smooth at the evaluation point.
        let ratio_pool: [f64; 8] = [0.5, 0.7, 0.9, 1.0, 1.05, 1.15, 1.6, 2.0];
        let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0xBEE);
        let lp_old: Vec<Vec<Vec<f64>>> = episodes
            .iter()
            .map(|e| {
                e.steps
                    .iter()
                    .map(|conv| {
                        conv.iter()
                            .map(|&(s, a)| {
                                policy.logprob(s, a) - ratio_pool[rng2.gen_range(0..8)].ln()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let lp_ref: Vec<Vec<Vec<f64>>> = episodes
            .iter()
            .map(|e| {
                e.steps
                    .iter()
                    .map(|conv| {
                        conv.iter()
                            .map(|&(s, a)| policy.logprob(s, a) + rng2.gen_range(-0.3..0.3))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let analytic =
            toy_objective_grad(&policy, &episodes, &lp_old, &lp_ref, &adv, &config).unwrap();
        let numeric =
            finite_difference_grad(&policy, &episodes, &lp_old, &lp_ref, &adv, &config, h)
                .unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (ra, rn) in analytic.iter().zip(&numeric) {
            for (a, n) in ra.iter().zip(rn) {
                num += (a - n) * (a - n);
                den += n * n;
            }
        }
        let rel = if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        };
        assert!(
            rel < 1e-4,
            "seed {seed}: relative gradient error {rel} >= 1e-4"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "gradient check took {elapsed:?}, budget is 10 s"
    );
    pass(1, "gradient vs central finite differences, 20 batches");
}

// --- 2. Advantage law --------------------------------------------------------

#[test]
fn criterion_2_advantage_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let g = rng.gen_range(2..=32);
        let config = DapoConfig {
            group_size: g,
            ..Default::default()
        };
        let rewards: Vec<f64> = (0..g).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let adv = compute_advantages(&rewards, &config).unwrap();
        let mean: f64 = adv.per_episode.iter().sum::<f64>() / g as f64;
        assert!(
            mean.abs() <= 1e-12,
            "case {case}: advantage mean {mean} exceeds 1e-12"
        );
    }
    // Normalized-variant hand case: R = (1, 0) -> (1, -1).
    let grpo = DapoConfig {
        group_size: 2,
        normalize_by_std: true,
        ..Default::default()
    };
    let adv = compute_advantages(&[1.0, 0.0], &grpo).unwrap();
    assert!((adv.per_episode[0] - 1.0).abs() < 1e-12);
    assert!((adv.per_episode[1] + 1.0).abs() < 1e-12);
    pass(2, "mean-zero advantages over 1000 groups + normalized hand case");
}

// --- 3. Toy RL learning ------------------------------------------------------

#[test]
fn criterion_3_toy_rl_learning() {
    let env = CopyMemoryEnv::default();
    let dapo = DapoConfig {
        group_size: 8,
        ..Default::default()
    };

    let mut policy = env.fresh_policy();
    let train = ToyTrainConfig {
        steps: 500,
        learning_rate: 0.1,
        samples_per_step: 8,
        seed: 0,
    };
    let curve = train_toy(&env, &mut policy, &dapo, &train).unwrap();
    let early: f64 = curve.points[..25].iter().map(|p| p.mean_reward).sum::<f64>() / 25.0;
    let late = curve.trailing_mean_reward(50);
    assert!(
        (0.35..=0.65).contains(&early),
        "early mean reward {early} is not near 0.5 chance"
    );
    assert!(late >= 0.9, "trailing mean reward {late} below 0.9");

    // Zero learning rate leaves the policy untouched and the curve at chance.
    let mut frozen = env.fresh_policy();
    let flat_train = ToyTrainConfig {
        learning_rate: 0.0,
        ..train
    };
    let flat = train_toy(&env, &mut frozen, &dapo, &flat_train).unwrap();
    assert_eq!(frozen, env.fresh_policy(), "lr=0 changed the policy");
    let flat_mean = flat.trailing_mean_reward(500);
    assert!(
        (flat_mean - 0.5).abs() < 0.05,
        "lr=0 curve mean {flat_mean} drifted from chance"
    );
    pass(3, "copy-memory reward 0.5 -> >=0.9 within 500 steps; flat at lr=0");
}

// --- 4. Workflow linearity ---------------------------------------------------

#[test]
fn criterion_4_workflow_linearity() {
    let started = Instant::now();
    let counter = TokenCounter::whitespace();
    let budgets = Budgets::default();
    let lengths = LengthSchedule::synthetic_tokens().values; // 8K .. 512K
    const INSTANCES_PER_LENGTH: usize = 2;
    const REPS: usize = 3;

    let mut points: Vec<(f64, f64)> = Vec::new();
    for &target in &lengths {
        let instances: Vec<TaskInstance> = (0..INSTANCES_PER_LENGTH)
            .map(|i| {
                gen_niah(
                    &NiahSpec::new(TaskFamily::NiahSingle1, target, 40 + i as u64),
                    &counter,
                )
                .unwrap()
            })
            .collect();

        let mut best = f64::INFINITY;
        for rep in 0..REPS {
            let gateway = MockGateway::new(MockScript::perfect_extractor());
            let t0 = Instant::now();
            let mut traces = Vec::new();
            for instance in &instances {
                traces.push(
                    run_episode(&instance.episode_input(), &gateway, &budgets, &counter)
                        .unwrap(),
                );
            }
            best = best.min(t0.elapsed().as_secs_f64());

            if rep == 0 {
                // accuracy 100% and exact call count at this length
                for (instance, trace) in instances.iter().zip(&traces) {
                    let reward = memagent::verify::score_completion(
                        trace.answer_completion().unwrap(),
                        &instance.answer_set(),
                    );
                    assert_eq!(
                        reward.score, 1.0,
                        "perfect extractor missed at length {target}"
                    );
                }
                let c_total: usize = instances
                    .iter()
                    .map(|i| counter.count(&i.context))
                    .sum();
                let expected_calls: usize = instances
                    .iter()
                    .map(|i| counter.count(&i.context).div_ceil(budgets.chunk) + 1)
                    .sum();
                assert_eq!(
                    gateway.stats().calls,
                    expected_calls,
                    "call count at length {target} (c_total {c_total})"
                );
            }
        }
        points.push(((target * INSTANCES_PER_LENGTH) as f64, best));
    }

    // Least-squares slope of ln(time) on ln(c).
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(c, t) in &points {
        let x = c.ln();
        let y = t.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(
        (slope - 1.0).abs() <= 0.15,
        "wall-clock scaling exponent {slope:.3} outside 1.0 +/- 0.15; points: {points:?}"
    );

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "linearity suite took {elapsed:?}, budget is 5 min"
    );
    pass(4, "100% accuracy 8K..512K, exact call counts, linear wall-clock");
}

// --- 5. Cost model -----------------------------------------------------------

#[test]
fn criterion_5_cost_model() {
    use memagent::cost::{compare, default_grid, plan_memagent, ModelShape, Stage};

    // Frozen stage-plan goldens for q=1024, o=1024, N=5000, c=10000.
    let plan = plan_memagent(1024, 1024, 5000, 10_000).unwrap();
    assert_eq!(plan.update_stages(), 2);
    assert_eq!(plan.stages.len(), 4);
    let totals: Vec<usize> = plan.stages.iter().map(Stage::total_tokens).collect();
    assert_eq!(totals, vec![2248, 7248, 7248, 2148]);
    let inputs: Vec<usize> = plan.stages.iter().map(|s| s.input_tokens).collect();
    assert_eq!(inputs, vec![1224, 6224, 6224, 1124]);

    let shape = ModelShape::seven_b();
    let grid = default_grid(); // 8K .. 4M doubling
    let rows = compare(&shape, 1024, 1024, 5000, &grid).unwrap();

    // Per processed token, the staged cost is flat within 5% from 64K up.
    let per_token: Vec<f64> = rows
        .iter()
        .filter(|r| r.context_tokens >= 64 * 1024)
        .map(|r| {
            let plan = plan_memagent(1024, 1024, 5000, r.context_tokens).unwrap();
            r.memagent_flops / plan.total_tokens() as f64
        })
        .collect();
    let lo = per_token.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_token.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        hi / lo <= 1.05,
        "staged per-token cost spread {:.4} beyond 64K exceeds 5%",
        hi / lo
    );

    // Asymptotic doubling ratios at the top of the grid.
    let last = &rows[rows.len() - 1];
    let prev = &rows[rows.len() - 2];
    let baseline_ratio = last.baseline_flops / prev.baseline_flops;
    let staged_ratio = last.memagent_flops / prev.memagent_flops;
    assert!(
        (3.8..=4.2).contains(&baseline_ratio),
        "baseline doubling ratio {baseline_ratio:.3} not within 4 +/- 5%"
    );
    assert!(
        (1.9..=2.1).contains(&staged_ratio),
        "staged doubling ratio {staged_ratio:.3} not within 2 +/- 5%"
    );
    pass(5, "stage-plan goldens, flat per-token cost, 4x/2x doubling laws");
}

// --- 6. Verifier oracles -----------------------------------------------------

/// Independent normalization for the oracle: operates on char vectors and
/// removes articles by token filtering rather than regex.
fn oracle_normalize(text: &str) -> Vec<String> {
    let mut cleaned = String::new();
    for ch in text.chars() {
        if ch.is_ascii_punctuation() {
            cleaned.push(' ');
        } else {
            cleaned.extend(ch.to_lowercase());
        }
    }
    cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .map(|w| w.to_string())
        .collect()
}

/// Naive double-loop containment over token positions.
fn oracle_all_of(pred: &str, answers: &[String]) -> (f64, Vec<bool>) {
    let pred_tokens = oracle_normalize(pred);
    let mut matched = Vec::new();
    for answer in answers {
        let answer_tokens = oracle_normalize(answer);
        let mut hit = false;
        if !answer_tokens.is_empty() {
            // Token-aligned window match handles the numeric boundary rule
            // (a numeric answer is a single token that must equal a whole
            // pred token); non-numeric answers may also match inside a
            // token boundary, mirroring plain substring containment.
            let joined_pred = pred_tokens.join(" ");
            let joined_answer = answer_tokens.join(" ");
            let numeric = joined_answer.chars().all(|c| c.is_ascii_digit());
            if numeric {
                hit = pred_tokens.iter().any(|t| {
                    // the digits must appear inside the token with
                    // non-alphanumeric flanks, or equal the token outright
                    if t == &joined_answer {
                        return true;
                    }
                    let chars: Vec<char> = t.chars().collect();
                    let needle: Vec<char> = joined_answer.chars().collect();
                    if chars.len() < needle.len() {
                        return false;
                    }
                    (0..=chars.len() - needle.len()).any(|i| {
                        chars[i..i + needle.len()] == needle[..]
                            && (i == 0 || !chars[i - 1].is_alphanumeric())
                            && (i + needle.len() == chars.len()
                                || !chars[i + needle.len()].is_alphanumeric())
                    })
                });
            } else {
                hit = joined_pred.contains(&joined_answer);
            }
        }
        matched.push(hit);
    }
    let score = matched.iter().filter(|&&m| m).count() as f64 / answers.len() as f64;
    (score, matched)
}

#[test]
fn criterion_6_verifier_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let words = ["alpha", "beta", "gamma", "delta", "42", "123", "1234", "7x"];
    for case in 0..10_000 {
        let pred: String = (0..rng.gen_range(0..10))
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ");
        let n_answers = rng.gen_range(1..=5);
        let answers: Vec<String> = (0..n_answers)
            .map(|_| {
                let w = words[rng.gen_range(0..words.len())];
                if rng.gen_bool(0.3) {
                    format!("{w} {}", words[rng.gen_range(0..words.len())])
                } else {
                    w.to_string()
                }
            })
            .collect();
        let set = AnswerSet::all_of(answers.clone());
        let ours = reward_all_of(&pred, &set);
        let (oracle_score, oracle_matched) = oracle_all_of(&pred, &answers);
        assert_eq!(
            ours.score, oracle_score,
            "case {case}: pred {pred:?} answers {answers:?}: {} vs oracle {}",
            ours.score, oracle_score
        );
        assert_eq!(ours.matched, oracle_matched, "case {case} matched vectors");
    }

    // Case-study string under three normalization variants.
    let truth = AnswerSet::any_of(["Greenwich Village, New York City"]);
    for variant in [
        "Greenwich Village, New York City",
        "greenwich village,  new york city.",
        "the Greenwich Village, New York City",
    ] {
        assert_eq!(
            reward_any_of(variant, &truth).score,
            1.0,
            "variant {variant:?} should be accepted"
        );
    }
    assert_eq!(reward_any_of("Brooklyn", &truth).score, 0.0);
    pass(6, "coverage reward equals brute-force oracle on 10^4 cases");
}

// --- 7. Synthesis soundness --------------------------------------------------

#[test]
fn criterion_7_synthesis_soundness() {
    let counter = TokenCounter::whitespace();
    const N: u64 = 1000;

    let niah_families = [
        (TaskFamily::NiahSingle1, 600),
        (TaskFamily::NiahSingle2, 700),
        (TaskFamily::NiahSingle3, 800),
        (TaskFamily::NiahMultikey1, 900),
        (TaskFamily::NiahMultikey2, 1400),
        (TaskFamily::NiahMultikey3, 2600),
        (TaskFamily::NiahMultiquery, 800),
        (TaskFamily::NiahMultivalue, 800),
    ];
    for (family, target) in niah_families {
        for seed in 0..N {
            let spec = NiahSpec::new(family, target, seed);
            let instance = gen_niah(&spec, &counter).unwrap();
            instance
                .validate(&counter)
                .unwrap_or_else(|e| panic!("{family} seed {seed}: {e}"));
            let again = gen_niah(&spec, &counter).unwrap();
            assert_eq!(instance, again, "{family} seed {seed} not reproducible");
        }
    }

    for seed in 0..N {
        let spec = VariableTrackingSpec::new(4, 2, 700, seed);
        let instance = gen_variable_tracking(&spec, &counter).unwrap();
        instance
            .validate(&counter)
            .unwrap_or_else(|e| panic!("vt seed {seed}: {e}"));
        let root = instance
            .question
            .split_whitespace()
            .find(|w| w.chars().all(|c| c.is_ascii_digit()))
            .unwrap();
        let mut oracle = reachable_from_root(&instance.context, root);
        let mut answers = instance.answers.clone();
        oracle.sort();
        answers.sort();
        assert_eq!(oracle, answers, "vt seed {seed} reachability mismatch");
        assert_eq!(
            instance,
            gen_variable_tracking(&spec, &counter).unwrap(),
            "vt seed {seed} not reproducible"
        );
    }

    for seed in 0..N {
        let spec = FreqWordsSpec {
            num_tokens: 2000,
            seed,
            ..Default::default()
        };
        let instance = gen_freq_words(&spec, &counter).unwrap();
        instance
            .validate(&counter)
            .unwrap_or_else(|e| panic!("fwe seed {seed}: {e}"));
        let mut oracle: Vec<String> = count_top_k(&instance.context, spec.top_k)
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        let mut answers = instance.answers.clone();
        oracle.sort();
        answers.sort();
        assert_eq!(oracle, answers, "fwe seed {seed} count-oracle mismatch");
        assert_eq!(
            instance,
            gen_freq_words(&spec, &counter).unwrap(),
            "fwe seed {seed} not reproducible"
        );
    }

    // Haystack QA over a synthetic corpus.
    let articles: Vec<CorpusArticle> = (0..40)
        .map(|i| {
            CorpusArticle::new(
                format!("art-{i}"),
                format!("Title {i}"),
                format!(
                    "article {i} body mentioning payload-{i} inside {} words",
                    (0..20).map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ")
                ),
                &counter,
            )
        })
        .collect();
    for seed in 0..N {
        let golden_idx = (seed % 40) as usize;
        let spec = QaSpec {
            instance_id: format!("qa-{seed}"),
            question: format!("Where is payload-{golden_idx}?"),
            answers: vec![format!("payload-{golden_idx}")],
            n_articles: 10,
            seed,
        };
        let goldens = vec![articles[golden_idx].clone()];
        let instance = build_qa_haystack(&spec, &goldens, &articles, &counter).unwrap();
        instance
            .validate(&counter)
            .unwrap_or_else(|e| panic!("qa seed {seed}: {e}"));
        assert_eq!(
            instance,
            build_qa_haystack(&spec, &goldens, &articles, &counter).unwrap(),
            "qa seed {seed} not reproducible"
        );
    }
    pass(7, "1000 instances/family: answers present, length within 2%, reproducible");
}

// --- 8. Template fidelity ----------------------------------------------------

#[test]
fn criterion_8_template_fidelity() {
    use memagent::workflow::{render_answer_prompt, render_memory_prompt};

    let question =
        "What is the special magic number for brave-lion mentioned in the provided text?";
    let memory_prompt = render_memory_prompt(
        question,
        "No previous memory.",
        "Some section text. One of the special magic numbers for brave-lion is: 4930211.",
    );
    let answer_prompt = render_answer_prompt(
        question,
        "- One of the special magic numbers for brave-lion is: 4930211.",
    );

    assert_eq!(
        memory_prompt,
        include_str!("golden/memory_prompt.txt"),
        "memory prompt drifted from golden file"
    );
    assert_eq!(
        answer_prompt,
        include_str!("golden/answer_prompt.txt"),
        "answer prompt drifted from golden file"
    );

    // Tag sequence and cues, byte-exact.
    let p_at = memory_prompt.find("<problem> ").unwrap();
    let m_at = memory_prompt.find(" </problem>\n\n<memory> ").unwrap();
    let s_at = memory_prompt.find(" </memory>\n\n<section> ").unwrap();
    let cue_at = memory_prompt.find(" </section>\n\nUpdated memory:").unwrap();
    assert!(p_at < m_at && m_at < s_at && s_at < cue_at);
    assert!(memory_prompt.ends_with("Updated memory:"));

    assert!(answer_prompt.contains("\\boxed{}"));
    assert!(answer_prompt.contains(" </problem>\n\n<memory> "));
    assert!(answer_prompt.ends_with("Your answer:"));
    pass(8, "prompt templates byte-exact against golden files");
}

// --- 9. Export round-trip ----------------------------------------------------

#[test]
fn criterion_9_export_round_trip() {
    let counter = TokenCounter::whitespace();
    let budgets = Budgets {
        query: 64,
        chunk: 200,
        memory: 64,
        output: 64,
    };
    let groups: Vec<ScoredGroup> = (0..3)
        .map(|g| {
            let instance = gen_niah(
                &NiahSpec::new(TaskFamily::NiahSingle1, 900, 90 + g),
                &counter,
            )
            .unwrap();
            let episodes: Vec<_> = (0..4)
                .map(|r| {
                    let gateway = MockGateway::new(MockScript::lossy(0.5, r));
                    let mut input: EpisodeInput = instance.episode_input();
                    input.sample_id = format!("{}#r{r}", instance.instance_id);
                    run_episode(&input, &gateway, &budgets, &counter).unwrap()
                })
                .collect();
            let rewards: Vec<f64> = episodes
                .iter()
                .map(|t| {
                    memagent::verify::score_completion(
                        t.answer_completion().unwrap(),
                        &instance.answer_set(),
                    )
                    .score
                })
                .collect();
            ScoredGroup {
                group_id: instance.instance_id.clone(),
                episodes,
                rewards,
            }
        })
        .collect();

    let records = export_trajectories(&groups, &DapoConfig::default()).unwrap();
    let expected_records: usize = groups
        .iter()
        .flat_map(|g| g.episodes.iter())
        .map(|t| t.conversations.len())
        .sum();
    assert_eq!(records.len(), expected_records);

    // Bit-exact round trip through JSONL.
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &records).unwrap();
    let back = read_trajectories(buf.as_slice()).unwrap();
    assert_eq!(records, back);
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.advantage.to_bits(), b.advantage.to_bits());
        assert_eq!(a.reward.to_bits(), b.reward.to_bits());
        assert_eq!(a.prompt, b.prompt);
        assert_eq!(a.completion, b.completion);
    }

    // Advantages: constant within each episode, zero mean within each group.
    for group in &groups {
        let group_records: Vec<_> = records
            .iter()
            .filter(|r| r.group_id == group.group_id)
            .collect();
        let mut sum = 0.0;
        for episode in &group.episodes {
            let advs: Vec<f64> = group_records
                .iter()
                .filter(|r| r.sample_id == episode.sample_id)
                .map(|r| r.advantage)
                .collect();
            assert!(!advs.is_empty());
            assert!(
                advs.windows(2).all(|w| w[0] == w[1]),
                "advantage varies within episode {}",
                episode.sample_id
            );
            sum += advs[0];
        }
        assert!(
            sum.abs() < 1e-12,
            "group {} advantages sum to {sum}",
            group.group_id
        );
    }

    // Imported prompts/completions reproduce the traces byte for byte.
    for group in &groups {
        for episode in &group.episodes {
            for (idx, conv) in episode.conversations.iter().enumerate() {
                let record = records
                    .iter()
                    .find(|r| r.sample_id == episode.sample_id && r.conv_index == idx)
                    .unwrap();
                assert_eq!(record.prompt, conv.prompt);
                assert_eq!(record.completion, conv.completion);
            }
        }
    }
    pass(9, "trajectory export/import bit-exact with per-group zero-mean advantages");
}

// --- supporting invariants exercised end to end ------------------------------

#[test]
fn memory_stays_bounded_and_calls_stay_linear_under_stress() {
    let counter = TokenCounter::whitespace();
    let budgets = Budgets {
        query: 64,
        chunk: 100,
        memory: 24,
        output: 64,
    };
    let gateway = MockGateway::with_max_in_flight(MockScript::perfect_extractor(), 8)
        .with_delay(std::time::Duration::from_micros(100));
    let instances: Vec<TaskInstance> = (0..100)
        .map(|i| {
            gen_niah(
                &NiahSpec::new(TaskFamily::NiahSingle1, 600, i),
                &counter,
            )
            .unwrap()
        })
        .collect();
    let inputs: Vec<EpisodeInput> = instances.iter().map(|i| i.episode_input()).collect();
    let results =
        memagent::workflow::run_episodes(&inputs, &gateway, &budgets, &counter, 32);

    let mut expected_calls = 0;
    for (instance, result) in instances.iter().zip(&results) {
        let trace = result.as_ref().unwrap();
        trace.check_shape().unwrap();
        for conv in &trace.conversations {
            if conv.kind == ConversationKind::MemoryUpdate {
                let mem = conv.memory_after.as_ref().unwrap();
                assert!(mem.token_count <= mem.capacity);
            }
        }
        let plan = chunk_document(&instance.context, budgets.chunk, &counter).unwrap();
        assert_eq!(trace.conversations.len(), plan.len() + 1);
        expected_calls += plan.len() + 1;
    }
    let stats = gateway.stats();
    assert_eq!(stats.calls, expected_calls);
    assert!(stats.peak_in_flight <= 8);
}
