//! `filter`: best-of-N no-context screening of a dataset.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use memagent::tasks::{filter_known_questions, write_instances};

use crate::commands::{build_gateway, load_dataset};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct FilterArgs {
    /// Dataset JSONL to filter.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (kept.jsonl).
    #[arg(long)]
    pub out: PathBuf,
    /// Endpoint config JSON.
    #[arg(long)]
    pub endpoint: Option<PathBuf>,
    /// Mock behavior spec.
    #[arg(long)]
    pub mock: Option<String>,
    /// No-context attempts per question.
    #[arg(long, default_value_t = 2)]
    pub attempts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 1024)]
    pub output_budget: usize,
}

pub fn run(args: FilterArgs) -> Result<()> {
    let gateway = build_gateway(
        args.endpoint.as_deref(),
        args.mock.as_deref(),
        args.seed,
        args.concurrency.max(1),
    )?;
    let samples = load_dataset(&args.dataset)?;
    let total = samples.len();
    let outcome =
        filter_known_questions(samples, gateway.as_ref(), args.attempts, args.output_budget);

    std::fs::create_dir_all(&args.out)?;
    let kept_path = args.out.join("kept.jsonl");
    let mut writer = BufWriter::new(File::create(&kept_path)?);
    write_instances(&mut writer, &outcome.kept)?;
    drop(writer);

    println!(
        "kept {}/{} ({} dropped as known, {} unfiltered due to gateway errors); drop rate {:.1}%",
        outcome.kept.len(),
        total,
        outcome.dropped.len(),
        outcome.unfiltered.len(),
        100.0 * outcome.drop_rate()
    );

    let mut manifest = ManifestBuilder::new(
        "filter",
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "attempts": args.attempts,
            "mock": args.mock,
            "dropped": outcome.dropped,
            "unfiltered": outcome.unfiltered,
            "drop_rate": outcome.drop_rate(),
        }),
        Some(args.seed),
    );
    manifest.record_input(&args.dataset)?;
    manifest.record_output(&kept_path)?;
    manifest.write(&args.out)?;
    Ok(())
}
