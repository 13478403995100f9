pub mod cost;
pub mod eval;
pub mod export_traj;
pub mod filter;
pub mod report;
pub mod score;
pub mod synth;
pub mod train_toy;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use memagent::gateway::{Gateway, HttpGateway};
use memagent::tasks::TaskInstance;
use memagent::tokens::TokenCounter;

use crate::mock_arg::parse_mock;

/// Build a gateway from either `--endpoint <config.json>` or `--mock <spec>`.
pub fn build_gateway(
    endpoint: Option<&Path>,
    mock: Option<&str>,
    seed: u64,
    max_in_flight: usize,
) -> Result<Box<dyn Gateway>> {
    match (endpoint, mock) {
        (Some(_), Some(_)) => bail!("--endpoint and --mock are mutually exclusive"),
        (None, None) => bail!("one of --endpoint or --mock is required"),
        (Some(path), None) => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading endpoint config {}", path.display()))?;
            let mut config: memagent::gateway::EndpointConfig = serde_json::from_str(&raw)
                .with_context(|| format!("parsing endpoint config {}", path.display()))?;
            config.max_in_flight = config.max_in_flight.max(max_in_flight);
            Ok(Box::new(HttpGateway::new(config)?))
        }
        (None, Some(spec)) => Ok(Box::new(parse_mock(spec, seed, max_in_flight)?)),
    }
}

pub fn parse_counter(spec: &str) -> Result<TokenCounter> {
    TokenCounter::parse_spec(spec).map_err(Into::into)
}

pub fn load_dataset(path: &Path) -> Result<Vec<TaskInstance>> {
    let file =
        File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    memagent::tasks::read_instances(BufReader::new(file))
        .with_context(|| format!("parsing dataset {}", path.display()))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    writer.write_all(content.as_bytes())?;
    writer.flush()?;
    Ok(())
}
