//! Operator surface: synthesize datasets, filter known questions, evaluate a
//! model through the chunked-memory workflow, score traces, export RL
//! trajectories, train the toy policy, and run the cost model.

mod chart;
mod commands;
mod manifest;
mod mock_arg;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "memagent",
    version,
    about = "Long-context harness: fixed-size overwrite memory over an LLM gateway"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets from a spec file.
    Synth(commands::synth::SynthArgs),
    /// Drop questions a model answers correctly without context.
    Filter(commands::filter::FilterArgs),
    /// Run the chunk -> memory -> answer workflow over a dataset.
    Eval(commands::eval::EvalArgs),
    /// Score traces against their dataset.
    Score(commands::score::ScoreArgs),
    /// Export scored traces as trainer-ready trajectories.
    ExportTraj(commands::export_traj::ExportTrajArgs),
    /// Train the copy-memory toy policy with the clipped objective.
    TrainToy(commands::train_toy::TrainToyArgs),
    /// Compare staged vs full-context FLOP cost.
    Cost(commands::cost::CostArgs),
    /// Render accuracy tables and charts from score summaries.
    Report(commands::report::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Filter(args) => commands::filter::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Score(args) => commands::score::run(args),
        Command::ExportTraj(args) => commands::export_traj::run(args),
        Command::TrainToy(args) => commands::train_toy::run(args),
        Command::Cost(args) => commands::cost::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
