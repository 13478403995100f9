//! `cost`: evaluate the staged vs full-context FLOP models over a context
//! grid; writes CSV, an optional log-log SVG chart, and reports measured
//! prompt-template overhead next to the constants the stage plan uses.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use memagent::cost::{
    compare, crossover_point, default_grid, rows_to_csv, ModelShape, FINAL_OVERHEAD_TOKENS,
    UPDATE_OVERHEAD_TOKENS,
};
use memagent::workflow::template_overhead;

use crate::chart::{render, ChartSpec, Series};
use crate::commands::{parse_counter, write_text};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct CostArgs {
    /// Output directory (cost.csv, cost.svg).
    #[arg(long)]
    pub out: PathBuf,
    /// Model shape JSON file; defaults to the built-in 7B-class shape.
    #[arg(long)]
    pub shape: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub query_tokens: usize,
    #[arg(long, default_value_t = 1024)]
    pub output_tokens: usize,
    #[arg(long, default_value_t = 5000)]
    pub chunk_budget: usize,
    /// Comma-separated context grid; defaults to 8K doubling to 4M.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,
    /// Also write a log-log SVG chart.
    #[arg(long, default_value_t = true)]
    pub svg: bool,
    /// Counter used for the measured template-overhead report.
    #[arg(long, default_value = "whitespace")]
    pub counter: String,
}

pub fn run(args: CostArgs) -> Result<()> {
    let shape = match &args.shape {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ModelShape::seven_b(),
    };
    let grid = if args.grid.is_empty() {
        default_grid()
    } else {
        args.grid.clone()
    };
    let rows = compare(
        &shape,
        args.query_tokens,
        args.output_tokens,
        args.chunk_budget,
        &grid,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("cost.csv");
    write_text(&csv_path, &rows_to_csv(&rows))?;

    let mut svg_path = None;
    if args.svg {
        let spec = ChartSpec {
            title: "Decoding cost across context lengths".into(),
            x_label: "context tokens".into(),
            y_label: "FLOPs".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "full context".into(),
                    points: rows
                        .iter()
                        .map(|r| (r.context_tokens as f64, r.baseline_flops))
                        .collect(),
                },
                Series {
                    label: "staged memory".into(),
                    points: rows
                        .iter()
                        .map(|r| (r.context_tokens as f64, r.memagent_flops))
                        .collect(),
                },
            ],
        };
        let path = args.out.join("cost.svg");
        write_text(&path, &render(&spec))?;
        svg_path = Some(path);
    }

    // Measured template overhead vs the constants in the stage plan.
    let counter = parse_counter(&args.counter)?;
    let measured_update = template_overhead(&counter, false);
    let measured_final = template_overhead(&counter, true);
    println!(
        "template overhead ({counter}): update measured {measured_update} tokens \
         (plan constant {UPDATE_OVERHEAD_TOKENS}), final measured {measured_final} tokens \
         (plan constant {FINAL_OVERHEAD_TOKENS})"
    );
    if let Some(c) = crossover_point(&rows) {
        println!("staged cost first beats full-context at c = {c}");
    } else {
        println!("staged cost never beats full-context on this grid");
    }
    for row in &rows {
        println!(
            "c={:>9}  baseline {:.3e}  staged {:.3e}  ratio {:.2}",
            row.context_tokens, row.baseline_flops, row.memagent_flops, row.ratio
        );
    }

    let mut manifest = ManifestBuilder::new(
        "cost",
        serde_json::json!({
            "shape": shape,
            "q": args.query_tokens,
            "o": args.output_tokens,
            "n": args.chunk_budget,
            "grid": grid,
            "measured_update_overhead": measured_update,
            "measured_final_overhead": measured_final,
            "crossover": crossover_point(&rows),
        }),
        None,
    );
    manifest.record_output(&csv_path)?;
    if let Some(path) = &svg_path {
        manifest.record_output(path)?;
    }
    manifest.write(&args.out)?;
    Ok(())
}
