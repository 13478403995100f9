//! `synth`: generate datasets from a JSON spec, one JSONL per
//! (family, length), with a reproducibility manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use memagent::tasks::{
    build_qa_haystack, gen_freq_words, gen_niah, gen_variable_tracking, write_instances,
    CorpusArticle, DatasetFileEntry, DatasetManifest, FreqWordsSpec, NiahSpec, QaSpec,
    TaskFamily, TaskInstance, VariableTrackingSpec,
};
use memagent::tokens::TokenCounter;

use crate::manifest::{hash_file, ManifestBuilder};

#[derive(Args)]
pub struct SynthArgs {
    /// Generation spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Top-level synth spec.
#[derive(Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Token counter spec: `whitespace`, `chars_div_4`, or `vocab:<path>`.
    #[serde(default = "default_counter")]
    pub counter: String,
    pub families: Vec<FamilySpec>,
}

fn default_counter() -> String {
    "whitespace".to_string()
}

/// One family block. `lengths` are token targets except for `qa_haystack`,
/// where `article_counts` drives size instead.
#[derive(Debug, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    #[serde(default)]
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub article_counts: Vec<usize>,
    pub instances_per_length: usize,
    #[serde(default)]
    pub num_distractor_needles: Option<usize>,
    #[serde(default = "default_four")]
    pub num_queries_or_values: usize,
    #[serde(default = "default_four")]
    pub chain_length: usize,
    #[serde(default = "default_one")]
    pub num_chains: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Corpus JSONL (one article per line) for `qa_haystack`.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Questions JSONL for `qa_haystack`.
    #[serde(default)]
    pub questions: Option<PathBuf>,
}

fn default_four() -> usize {
    4
}
fn default_one() -> usize {
    1
}
fn default_alpha() -> f64 {
    2.0
}
fn default_vocab() -> usize {
    1000
}
fn default_top_k() -> usize {
    3
}

/// One QA question with its golden evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaQuestion {
    pub question_id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub golden_article_ids: Vec<String>,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let raw = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))?;
    let mut spec: SynthSpec = serde_json::from_str(&raw).map_err(|e| {
        anyhow::anyhow!(
            "spec {} line {} column {}: {e}",
            args.spec.display(),
            e.line(),
            e.column()
        )
    })?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let counter = TokenCounter::parse_spec(&spec.counter)?;
    std::fs::create_dir_all(&args.out)?;

    let mut manifest = ManifestBuilder::new(
        "synth",
        serde_json::json!({"spec": args.spec.display().to_string()}),
        Some(spec.seed),
    );
    manifest.record_input(&args.spec)?;

    if spec.families.is_empty() {
        eprintln!("warning: spec contains no families; nothing to generate");
        manifest.write(&args.out)?;
        return Ok(());
    }

    let mut entries: Vec<DatasetFileEntry> = Vec::new();
    for family_spec in &spec.families {
        let Some(family) = TaskFamily::parse(&family_spec.family) else {
            bail!("unknown family {:?}", family_spec.family);
        };
        let files = match family {
            TaskFamily::QaHaystack => synth_qa(family_spec, spec.seed, &counter, &args.out)?,
            _ => synth_synthetic(family, family_spec, spec.seed, &counter, &args.out)?,
        };
        entries.extend(files);
    }

    for entry in &entries {
        manifest.record_output(Path::new(&entry.path))?;
        println!(
            "wrote {} ({} instances, {})",
            entry.path, entry.n_instances, entry.sha256
        );
    }

    let dataset_manifest = DatasetManifest {
        seed: spec.seed,
        counter: counter.to_string(),
        spec: serde_json::from_str(&raw)?,
        files: entries,
    };
    let dm_path = args.out.join("dataset_manifest.json");
    std::fs::write(&dm_path, serde_json::to_string_pretty(&dataset_manifest)?)?;
    manifest.record_output(&dm_path)?;
    manifest.write(&args.out)?;
    Ok(())
}

fn synth_synthetic(
    family: TaskFamily,
    spec: &FamilySpec,
    seed: u64,
    counter: &TokenCounter,
    out: &Path,
) -> Result<Vec<DatasetFileEntry>> {
    if spec.lengths.is_empty() {
        bail!("family {family} needs non-empty lengths");
    }
    let mut entries = Vec::new();
    for &length in &spec.lengths {
        let mut instances = Vec::with_capacity(spec.instances_per_length);
        for index in 0..spec.instances_per_length {
            let instance_seed = derive_seed(seed, family.name(), length, index);
            let mut instance = generate_one(family, spec, length, instance_seed, counter)?;
            instance.instance_id = format!("{}-{}-{:04}", family.name(), length, index);
            instances.push(instance);
        }
        entries.push(write_family_file(family, length, &instances, out)?);
    }
    Ok(entries)
}

fn generate_one(
    family: TaskFamily,
    spec: &FamilySpec,
    length: usize,
    seed: u64,
    counter: &TokenCounter,
) -> Result<TaskInstance> {
    let instance = match family {
        TaskFamily::VariableTracking => gen_variable_tracking(
            &VariableTrackingSpec::new(spec.chain_length, spec.num_chains, length, seed),
            counter,
        )?,
        TaskFamily::FreqWords => gen_freq_words(
            &FreqWordsSpec {
                alpha: spec.alpha,
                vocab_size: spec.vocab_size,
                num_tokens: length,
                top_k: spec.top_k,
                seed,
            },
            counter,
        )?,
        TaskFamily::QaHaystack => unreachable!("qa handled separately"),
        _ => {
            let mut niah = NiahSpec::new(family, length, seed);
            niah.num_distractor_needles = spec.num_distractor_needles;
            niah.num_queries_or_values = spec.num_queries_or_values;
            gen_niah(&niah, counter)?
        }
    };
    Ok(instance)
}

fn synth_qa(
    spec: &FamilySpec,
    seed: u64,
    counter: &TokenCounter,
    out: &Path,
) -> Result<Vec<DatasetFileEntry>> {
    let corpus_path = spec
        .corpus
        .as_ref()
        .context("qa_haystack needs a corpus path")?;
    let questions_path = spec
        .questions
        .as_ref()
        .context("qa_haystack needs a questions path")?;
    if spec.article_counts.is_empty() {
        bail!("qa_haystack needs non-empty article_counts");
    }

    let articles = read_jsonl::<CorpusArticle>(corpus_path)?;
    let questions = read_jsonl::<QaQuestion>(questions_path)?;
    anyhow::ensure!(!questions.is_empty(), "questions file is empty");

    let mut entries = Vec::new();
    // The same question set is reused at every length so accuracy curves
    // compare like for like.
    for &n_articles in &spec.article_counts {
        let mut instances = Vec::new();
        for (index, q) in questions
            .iter()
            .take(spec.instances_per_length)
            .enumerate()
        {
            let goldens: Vec<CorpusArticle> = articles
                .iter()
                .filter(|a| q.golden_article_ids.contains(&a.article_id))
                .cloned()
                .collect();
            anyhow::ensure!(
                !goldens.is_empty(),
                "question {} references no known articles",
                q.question_id
            );
            let qa_spec = QaSpec {
                instance_id: format!("qa_haystack-{}-{:04}", n_articles, index),
                question: q.question.clone(),
                answers: q.answers.clone(),
                n_articles,
                seed: derive_seed(seed, "qa_haystack", n_articles, index),
            };
            instances.push(build_qa_haystack(&qa_spec, &goldens, &articles, counter)?);
        }
        entries.push(write_family_file(
            TaskFamily::QaHaystack,
            n_articles,
            &instances,
            out,
        )?);
    }
    Ok(entries)
}

fn write_family_file(
    family: TaskFamily,
    length: usize,
    instances: &[TaskInstance],
    out: &Path,
) -> Result<DatasetFileEntry> {
    let path = out.join(format!("{}-{}.jsonl", family.name(), length));
    let file = File::create(&path)?;
    let mut writer = BufWriter::new(file);
    write_instances(&mut writer, instances)?;
    drop(writer);
    let hashed = hash_file(&path)?;
    Ok(DatasetFileEntry {
        path: path.display().to_string(),
        family: family.name().to_string(),
        length,
        n_instances: instances.len(),
        sha256: hashed.sha256,
    })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    use std::io::BufRead;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), idx + 1))?;
        out.push(item);
    }
    Ok(out)
}

fn derive_seed(seed: u64, family: &str, length: usize, index: usize) -> u64 {
    let mut h = seed ^ 0x51_7c_c1_b7_27_22_0a_95;
    for b in family.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3);
    }
    h ^= (length as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h ^= (index as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h
}
