//! Dataset JSONL: one task instance per line, plus a reproducibility
//! manifest recording the generator spec, seed, and file hashes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TaskInstance;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn write_instances<W: Write>(
    writer: &mut W,
    instances: &[TaskInstance],
) -> Result<(), DatasetIoError> {
    for instance in instances {
        let json = serde_json::to_string(instance).map_err(|source| DatasetIoError::Parse {
            line: 0,
            source,
        })?;
        writeln!(writer, "{json}")?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<TaskInstance>, DatasetIoError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let instance =
            serde_json::from_str(&line).map_err(|source| DatasetIoError::Parse {
                line: idx + 1,
                source,
            })?;
        out.push(instance);
    }
    Ok(out)
}

/// One generated dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFileEntry {
    pub path: String,
    pub family: String,
    pub length: usize,
    pub n_instances: usize,
    pub sha256: String,
}

/// Reproducibility record written beside generated datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub counter: String,
    pub spec: serde_json::Value,
    pub files: Vec<DatasetFileEntry>,
}
