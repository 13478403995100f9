//! `eval`: drive every dataset instance through the chunked-memory workflow,
//! writing one trace per episode. Resumable: instances whose sample ids are
//! already present in the output file are skipped, so an interrupted run
//! picks up where it stopped and converges to the same trace set.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use memagent::workflow::trace_io::{read_traces, trace_lines};
use memagent::workflow::{run_episodes, Budgets, EpisodeInput};

use crate::commands::{build_gateway, load_dataset, parse_counter};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct EvalArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (traces.jsonl, timings.csv, errors.jsonl).
    #[arg(long)]
    pub out: PathBuf,
    /// Endpoint config JSON.
    #[arg(long)]
    pub endpoint: Option<PathBuf>,
    /// Mock behavior spec.
    #[arg(long)]
    pub mock: Option<String>,
    /// Worker threads (also the gateway in-flight floor).
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Episodes rolled out per instance (trace sample ids gain a `#r<i>`
    /// suffix when > 1).
    #[arg(long, default_value_t = 1)]
    pub rollouts: usize,
    /// Evaluate only the first N instances.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Seed for mock randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Token counter spec.
    #[arg(long, default_value = "whitespace")]
    pub counter: String,
    #[arg(long, default_value_t = 1024)]
    pub query_budget: usize,
    #[arg(long, default_value_t = 5000)]
    pub chunk_budget: usize,
    #[arg(long, default_value_t = 1024)]
    pub memory_budget: usize,
    #[arg(long, default_value_t = 1024)]
    pub output_budget: usize,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let counter = parse_counter(&args.counter)?;
    let gateway = build_gateway(
        args.endpoint.as_deref(),
        args.mock.as_deref(),
        args.seed,
        args.concurrency.max(1),
    )?;
    let budgets = Budgets {
        query: args.query_budget,
        chunk: args.chunk_budget,
        memory: args.memory_budget,
        output: args.output_budget,
    };

    let mut instances = load_dataset(&args.dataset)?;
    if let Some(limit) = args.limit {
        instances.truncate(limit);
    }
    std::fs::create_dir_all(&args.out)?;
    let traces_path = args.out.join("traces.jsonl");

    // Resume: collect the sample ids already on disk.
    let done: HashSet<String> = if traces_path.exists() {
        let file = File::open(&traces_path)?;
        read_traces(BufReader::new(file))?
            .into_iter()
            .map(|t| t.sample_id)
            .collect()
    } else {
        HashSet::new()
    };

    let mut pending: Vec<EpisodeInput> = Vec::new();
    for instance in &instances {
        for rollout in 0..args.rollouts.max(1) {
            let sample_id = if args.rollouts > 1 {
                format!("{}#r{}", instance.instance_id, rollout)
            } else {
                instance.instance_id.clone()
            };
            if done.contains(&sample_id) {
                continue;
            }
            let mut input = instance.episode_input();
            input.sample_id = sample_id;
            pending.push(input);
        }
    }
    if pending.is_empty() {
        println!("nothing to do: all {} episodes already traced", done.len());
        return Ok(());
    }
    println!(
        "evaluating {} episodes ({} already done)",
        pending.len(),
        done.len()
    );

    let results = run_episodes(&pending, gateway.as_ref(), &budgets, &counter, args.concurrency);

    let mut traces_file = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&traces_path)
            .with_context(|| format!("opening {}", traces_path.display()))?,
    );
    let timings_path = args.out.join("timings.csv");
    let new_timings = !timings_path.exists();
    let mut timings = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&timings_path)?,
    );
    if new_timings {
        writeln!(timings, "sample_id,wall_clock_ms,conversations")?;
    }
    let errors_path = args.out.join("errors.jsonl");
    let mut errors = BufWriter::new(OpenOptions::new().create(true).append(true).open(&errors_path)?);

    let mut ok = 0usize;
    let mut failed = 0usize;
    for (input, outcome) in pending.iter().zip(results) {
        match outcome {
            Ok(trace) => {
                let total_ms: f64 = trace.conversations.iter().map(|c| c.wall_clock_ms).sum();
                writeln!(
                    timings,
                    "{},{},{}",
                    trace.sample_id,
                    total_ms,
                    trace.conversations.len()
                )?;
                for line in trace_lines(std::slice::from_ref(&trace)) {
                    serde_json::to_writer(&mut traces_file, &line)?;
                    writeln!(traces_file)?;
                }
                ok += 1;
            }
            Err(err) => {
                let record = serde_json::json!({
                    "sample_id": input.sample_id,
                    "error": err.to_string(),
                });
                writeln!(errors, "{record}")?;
                failed += 1;
            }
        }
    }
    traces_file.flush()?;
    timings.flush()?;
    errors.flush()?;

    let stats = gateway.stats();
    println!(
        "done: {ok} traced, {failed} failed, {} gateway calls (peak in-flight {})",
        stats.calls, stats.peak_in_flight
    );

    let mut manifest = ManifestBuilder::new(
        "eval",
        serde_json::json!({
            "dataset": args.dataset.display().to_string(),
            "mock": args.mock,
            "rollouts": args.rollouts,
            "concurrency": args.concurrency,
            "budgets": budgets,
            "counter": counter.to_string(),
            "gateway_calls": stats.calls,
            "failed": failed,
        }),
        Some(args.seed),
    );
    manifest.record_input(&args.dataset)?;
    manifest.record_output(&traces_path)?;
    manifest.write(&args.out)?;
    Ok(())
}
