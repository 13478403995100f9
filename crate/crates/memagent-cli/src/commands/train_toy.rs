//! `train-toy`: gradient-ascent training of the tabular policy on the
//! copy-memory game; writes the learning curve as CSV.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use memagent::dapo::{train_toy, CopyMemoryEnv, DapoConfig, ToyTrainConfig};

use crate::commands::write_text;
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct TrainToyArgs {
    /// Output directory (curve.csv).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub group_size: usize,
    #[arg(long, default_value_t = 8)]
    pub samples_per_step: usize,
    #[arg(long, default_value_t = 2)]
    pub symbols: usize,
    #[arg(long, default_value_t = 1)]
    pub hops: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub kl_beta: f64,
}

pub fn run(args: TrainToyArgs) -> Result<()> {
    let env = CopyMemoryEnv {
        num_symbols: args.symbols,
        hops: args.hops,
    };
    let dapo = DapoConfig {
        group_size: args.group_size,
        kl_beta: args.kl_beta,
        ..Default::default()
    };
    let train = ToyTrainConfig {
        steps: args.steps,
        learning_rate: args.lr,
        samples_per_step: args.samples_per_step,
        seed: args.seed,
    };
    let mut policy = env.fresh_policy();
    let curve = train_toy(&env, &mut policy, &dapo, &train)?;

    std::fs::create_dir_all(&args.out)?;
    let curve_path = args.out.join("curve.csv");
    write_text(&curve_path, &curve.to_csv())?;

    let first = curve.points.first().map(|p| p.mean_reward).unwrap_or(0.0);
    let trailing = curve.trailing_mean_reward(50);
    println!(
        "trained {} steps: first-step reward {:.3}, trailing-50 mean {:.3}",
        args.steps, first, trailing
    );

    let mut manifest = ManifestBuilder::new(
        "train-toy",
        serde_json::json!({
            "steps": args.steps,
            "lr": args.lr,
            "group_size": args.group_size,
            "samples_per_step": args.samples_per_step,
            "symbols": args.symbols,
            "hops": args.hops,
            "kl_beta": args.kl_beta,
            "trailing_mean_reward": trailing,
        }),
        Some(args.seed),
    );
    manifest.record_output(&curve_path)?;
    manifest.write(&args.out)?;
    Ok(())
}
