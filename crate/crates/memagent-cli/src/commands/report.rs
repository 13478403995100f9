//! `report`: merge score summaries into accuracy-vs-length tables (one row
//! per model, one column per length) and an SVG chart with a log length
//! axis. Cells carry a binomial confidence interval.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use crate::chart::{render, ChartSpec, Series};
use crate::commands::write_text;
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct ReportArgs {
    /// One or more summary.csv files from `score`.
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Output directory (report.md, accuracy.svg).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
struct SummaryRow {
    model: String,
    family: String,
    length: usize,
    accuracy: f64,
    n_samples: usize,
}

pub fn run(args: ReportArgs) -> Result<()> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for path in &args.scores {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        for (idx, line) in raw.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            anyhow::ensure!(
                cols.len() >= 5,
                "{} line {}: expected at least 5 columns",
                path.display(),
                idx + 1
            );
            rows.push(SummaryRow {
                model: cols[0].to_string(),
                family: cols[1].to_string(),
                length: cols[2].parse()?,
                accuracy: cols[3].parse()?,
                n_samples: cols[4].parse()?,
            });
        }
    }
    anyhow::ensure!(!rows.is_empty(), "no summary rows found");

    // family -> model -> length -> row
    let mut families: BTreeMap<String, BTreeMap<String, BTreeMap<usize, SummaryRow>>> =
        BTreeMap::new();
    for row in rows {
        families
            .entry(row.family.clone())
            .or_default()
            .entry(row.model.clone())
            .or_default()
            .insert(row.length, row);
    }

    let mut md = String::from("# Accuracy by context length\n");
    let mut series: Vec<Series> = Vec::new();
    for (family, models) in &families {
        let lengths: BTreeSet<usize> = models
            .values()
            .flat_map(|by_len| by_len.keys().copied())
            .collect();
        // Warn when models were scored on different grids.
        for (model, by_len) in models {
            if by_len.len() != lengths.len() {
                eprintln!(
                    "warning: model {model} is missing {} of {} lengths for {family}; \
                     blank cells emitted",
                    lengths.len() - by_len.len(),
                    lengths.len()
                );
            }
        }

        md.push_str(&format!("\n## {family}\n\n"));
        md.push_str("| Model |");
        for l in &lengths {
            md.push_str(&format!(" {} |", pretty_length(*l)));
        }
        md.push_str("\n|---|");
        md.push_str(&"---|".repeat(lengths.len()));
        md.push('\n');
        for (model, by_len) in models {
            md.push_str(&format!("| {model} |"));
            for l in &lengths {
                match by_len.get(l) {
                    Some(row) => {
                        let (lo, hi) = wilson_interval(row.accuracy / 100.0, row.n_samples);
                        md.push_str(&format!(
                            " {:.2} ({:.0}-{:.0}) |",
                            row.accuracy,
                            lo * 100.0,
                            hi * 100.0
                        ));
                    }
                    None => md.push_str("  |"),
                }
            }
            md.push('\n');
            series.push(Series {
                label: format!("{model}/{family}"),
                points: by_len
                    .values()
                    .map(|r| (r.length as f64, r.accuracy))
                    .collect(),
            });
        }
        md.push_str("\nCells are accuracy % with a 95% binomial interval.\n");
    }

    std::fs::create_dir_all(&args.out)?;
    let md_path = args.out.join("report.md");
    write_text(&md_path, &md)?;
    let svg_path = args.out.join("accuracy.svg");
    write_text(
        &svg_path,
        &render(&ChartSpec {
            title: "Accuracy vs context length".into(),
            x_label: "context tokens".into(),
            y_label: "accuracy (%)".into(),
            log_x: true,
            log_y: false,
            series,
        }),
    )?;
    println!("{md}");

    let mut manifest = ManifestBuilder::new(
        "report",
        serde_json::json!({
            "scores": args.scores.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
        None,
    );
    for path in &args.scores {
        manifest.record_input(path)?;
    }
    manifest.record_output(&md_path)?;
    manifest.record_output(&svg_path)?;
    manifest.write(&args.out)?;
    Ok(())
}

fn pretty_length(tokens: usize) -> String {
    if tokens >= 1 << 20 {
        format!("{:.2}M", tokens as f64 / (1 << 20) as f64)
    } else if tokens >= 1 << 10 {
        format!("{}K", tokens >> 10)
    } else {
        tokens.to_string()
    }
}

/// 95% Wilson score interval for a binomial proportion.
fn wilson_interval(p: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = n as f64;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let margin = (z / denom) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((center - margin).max(0.0), (center + margin).min(1.0))
}
