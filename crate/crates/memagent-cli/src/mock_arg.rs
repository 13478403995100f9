//! Parse `--mock` behavior strings into gateway scripts.
//!
//! Grammar: `echo_memory | perfect_extractor | k_hop_extractor |
//! lossy:<p_drop> | fixed_answer:<text> | replay:<traces.jsonl>`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use memagent::gateway::{MockGateway, MockScript};
use memagent::workflow::trace_io::read_traces;

pub fn parse_mock(spec: &str, seed: u64, max_in_flight: usize) -> Result<MockGateway> {
    let script = parse_script(spec, seed)?;
    Ok(MockGateway::with_max_in_flight(script, max_in_flight))
}

fn parse_script(spec: &str, seed: u64) -> Result<MockScript> {
    if let Some(rest) = spec.strip_prefix("lossy:") {
        let p_drop: f64 = rest
            .parse()
            .with_context(|| format!("lossy drop probability {rest:?}"))?;
        if !(0.0..=1.0).contains(&p_drop) {
            bail!("lossy drop probability must be within [0, 1], got {p_drop}");
        }
        return Ok(MockScript::lossy(p_drop, seed));
    }
    if let Some(text) = spec.strip_prefix("fixed_answer:") {
        return Ok(MockScript::fixed_answer(text));
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let file = File::open(Path::new(path)).with_context(|| format!("replay file {path}"))?;
        let traces = read_traces(BufReader::new(file))?;
        let pairs = traces.iter().flat_map(|t| {
            t.conversations
                .iter()
                .map(|c| (c.prompt.clone(), c.completion.clone()))
        });
        return Ok(MockScript::replay(pairs));
    }
    match spec {
        "echo_memory" => Ok(MockScript::new(
            memagent::gateway::MockBehavior::EchoMemory,
            seed,
        )),
        "perfect_extractor" => Ok(MockScript::new(
            memagent::gateway::MockBehavior::PerfectExtractor,
            seed,
        )),
        "k_hop_extractor" => Ok(MockScript::new(
            memagent::gateway::MockBehavior::KHopExtractor,
            seed,
        )),
        other => bail!(
            "unknown mock behavior {other:?}; expected echo_memory, perfect_extractor, \
             k_hop_extractor, lossy:<p>, fixed_answer:<text>, or replay:<path>"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_behaviors() {
        assert!(parse_mock("echo_memory", 0, 4).is_ok());
        assert!(parse_mock("perfect_extractor", 0, 4).is_ok());
        assert!(parse_mock("lossy:0.25", 0, 4).is_ok());
        assert!(parse_mock("fixed_answer:\\boxed{42}", 0, 4).is_ok());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_mock("telepathy", 0, 4).is_err());
        assert!(parse_mock("lossy:1.5", 0, 4).is_err());
    }
}
