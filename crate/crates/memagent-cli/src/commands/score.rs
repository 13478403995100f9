//! `score`: join traces with their dataset, compute rule-based rewards, and
//! emit per-sample plus aggregate CSVs.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use memagent::tasks::TaskInstance;
use memagent::verify::{numeric_near_miss, score_completion};
use memagent::workflow::trace_io::read_traces;

use crate::commands::{load_dataset, write_text};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct ScoreArgs {
    /// Traces JSONL from `eval`.
    #[arg(long)]
    pub traces: PathBuf,
    /// Dataset JSONL the traces came from.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (scores.csv, summary.csv).
    #[arg(long)]
    pub out: PathBuf,
    /// Model label for the summary rows.
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Optional timings.csv from `eval` for wall-clock aggregates.
    #[arg(long)]
    pub timings: Option<PathBuf>,
}

pub fn run(args: ScoreArgs) -> Result<()> {
    let instances = load_dataset(&args.dataset)?;
    let by_id: HashMap<&str, &TaskInstance> = instances
        .iter()
        .map(|i| (i.instance_id.as_str(), i))
        .collect();

    let file = File::open(&args.traces)
        .with_context(|| format!("opening traces {}", args.traces.display()))?;
    let traces = read_traces(BufReader::new(file))?;

    let timings: HashMap<String, f64> = match &args.timings {
        Some(path) => read_timings(path)?,
        None => {
            let sibling = args.traces.parent().map(|d| d.join("timings.csv"));
            match sibling {
                Some(p) if p.exists() => read_timings(&p)?,
                _ => HashMap::new(),
            }
        }
    };

    let mut scores_csv =
        String::from("instance_id,sample_id,family,length,score,extraction_ok,near_miss\n");
    // (family, length) -> (sum score, n, sum wall clock, n with timing)
    let mut aggregates: HashMap<(String, usize), (f64, usize, f64, usize)> = HashMap::new();
    let mut missing = 0usize;

    for trace in &traces {
        let instance_id = trace
            .sample_id
            .split('#')
            .next()
            .unwrap_or(&trace.sample_id);
        let Some(instance) = by_id.get(instance_id) else {
            missing += 1;
            continue;
        };
        let answers = instance.answer_set();
        let completion = trace.answer_completion().unwrap_or("");
        let result = score_completion(completion, &answers);
        let near_miss = result.score < 1.0 && numeric_near_miss(&result.extracted_answer, &answers);
        scores_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            instance.instance_id,
            trace.sample_id,
            instance.family,
            instance.target_token_count,
            result.score,
            result.extraction_ok,
            near_miss
        ));
        let key = (instance.family.to_string(), instance.target_token_count);
        let entry = aggregates.entry(key).or_insert((0.0, 0, 0.0, 0));
        entry.0 += result.score;
        entry.1 += 1;
        if let Some(ms) = timings.get(&trace.sample_id) {
            entry.2 += ms;
            entry.3 += 1;
        }
    }
    if missing > 0 {
        eprintln!("warning: {missing} traces had no matching dataset instance");
    }

    let mut summary_rows: Vec<((String, usize), (f64, usize, f64, usize))> =
        aggregates.into_iter().collect();
    summary_rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut summary_csv =
        String::from("model,family,length,accuracy,n_samples,mean_wall_clock_ms\n");
    for ((family, length), (sum, n, ms_sum, ms_n)) in &summary_rows {
        let accuracy = 100.0 * sum / *n as f64;
        let mean_ms = if *ms_n > 0 {
            format!("{:.3}", ms_sum / *ms_n as f64)
        } else {
            String::new()
        };
        summary_csv.push_str(&format!(
            "{},{},{},{:.4},{},{}\n",
            args.model, family, length, accuracy, n, mean_ms
        ));
    }

    std::fs::create_dir_all(&args.out)?;
    let scores_path = args.out.join("scores.csv");
    let summary_path = args.out.join("summary.csv");
    write_text(&scores_path, &scores_csv)?;
    write_text(&summary_path, &summary_csv)?;
    println!("{summary_csv}");

    let mut manifest = ManifestBuilder::new(
        "score",
        serde_json::json!({
            "traces": args.traces.display().to_string(),
            "dataset": args.dataset.display().to_string(),
            "model": args.model,
        }),
        None,
    );
    manifest.record_input(&args.traces)?;
    manifest.record_input(&args.dataset)?;
    manifest.record_output(&scores_path)?;
    manifest.record_output(&summary_path)?;
    manifest.write(&args.out)?;
    Ok(())
}

fn read_timings(path: &PathBuf) -> Result<HashMap<String, f64>> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("reading timings {}", path.display()))?;
    let mut out = HashMap::new();
    for line in raw.lines().skip(1) {
        let mut parts = line.split(',');
        if let (Some(id), Some(ms)) = (parts.next(), parts.next()) {
            if let Ok(ms) = ms.parse::<f64>() {
                out.insert(id.to_string(), ms);
            }
        }
    }
    Ok(out)
}
