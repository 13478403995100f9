//! `export-traj`: score traces, group rollouts per instance, and write
//! trainer-ready trajectory records with group-relative advantages.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use memagent::dapo::{export_trajectories, write_trajectories, DapoConfig, ScoredGroup};
use memagent::verify::score_completion;
use memagent::workflow::trace_io::read_traces;

use crate::commands::load_dataset;
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct ExportTrajArgs {
    /// Traces JSONL from `eval` (use --rollouts >= 2 there).
    #[arg(long)]
    pub traces: PathBuf,
    /// Dataset JSONL for rewards.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (trajectories.jsonl).
    #[arg(long)]
    pub out: PathBuf,
    /// Normalize advantages by the group reward std.
    #[arg(long, default_value_t = false)]
    pub normalize_by_std: bool,
}

pub fn run(args: ExportTrajArgs) -> Result<()> {
    let instances = load_dataset(&args.dataset)?;
    let by_id: HashMap<&str, _> = instances
        .iter()
        .map(|i| (i.instance_id.as_str(), i))
        .collect();

    let file = File::open(&args.traces)
        .with_context(|| format!("opening traces {}", args.traces.display()))?;
    let traces = read_traces(BufReader::new(file))?;

    // Group episodes by instance id (rollout suffixes stripped), keeping
    // first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, ScoredGroup> = HashMap::new();
    for trace in traces {
        let group_id = trace
            .sample_id
            .split('#')
            .next()
            .unwrap_or(&trace.sample_id)
            .to_string();
        let Some(instance) = by_id.get(group_id.as_str()) else {
            anyhow::bail!("trace {} has no dataset instance", trace.sample_id);
        };
        let reward = score_completion(
            trace.answer_completion().unwrap_or(""),
            &instance.answer_set(),
        )
        .score;
        let group = groups.entry(group_id.clone()).or_insert_with(|| {
            order.push(group_id.clone());
            ScoredGroup {
                group_id,
                episodes: Vec::new(),
                rewards: Vec::new(),
            }
        });
        group.episodes.push(trace);
        group.rewards.push(reward);
    }

    let ordered: Vec<ScoredGroup> = order
        .iter()
        .map(|id| groups.remove(id).expect("group recorded"))
        .collect();
    let config = DapoConfig {
        normalize_by_std: args.normalize_by_std,
        ..Default::default()
    };
    let records = export_trajectories(&ordered, &config)?;

    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("trajectories.jsonl");
    let mut writer = BufWriter::new(File::create(&path)?);
    write_trajectories(&mut writer, &records)?;
    drop(writer);
    println!(
        "exported {} conversation records across {} groups",
        records.len(),
        ordered.len()
    );

    let mut manifest = ManifestBuilder::new(
        "export-traj",
        serde_json::json!({
            "traces": args.traces.display().to_string(),
            "dataset": args.dataset.display().to_string(),
            "normalize_by_std": args.normalize_by_std,
            "groups": ordered.len(),
        }),
        None,
    );
    manifest.record_input(&args.traces)?;
    manifest.record_input(&args.dataset)?;
    manifest.record_output(&path)?;
    manifest.write(&args.out)?;
    Ok(())
}
