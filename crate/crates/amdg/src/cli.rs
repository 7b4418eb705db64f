//! Command-line entry point wiring every module into one pipeline.
//!
//! A single `amdg` binary exposes the whole toolkit as subcommands:
//! `build-dict`, `dedomain`, `stats`, `similarity`, `sample`, `mix`,
//! `manifest`, `train-lm`, `adapt-lm`, `ppl`, `evaluate`, and `synth`.
//! The full chain `synth → dedomain → mix → train-lm → adapt-lm → ppl`
//! runs unattended from one configuration file.
//!
//! Configuration comes from flags, optionally backed by a JSON file
//! passed with `--config`: the file holds one object per subcommand
//! (keys named like the subcommands) plus a shared `seed`, flags
//! override file values, and unknown keys are rejected by name. Every
//! input path is checked for existence before any work starts. When
//! `AMDG_DATA_DIR` is set, relative paths resolve inside it.
//!
//! All reports are rendered as canonical JSON: keys sorted, 0..100
//! metric values fixed to two decimals, perplexities to four. Failures
//! print a machine-readable record `{"error":{"message":…,"module":…}}`
//! to stderr and exit nonzero. `--record` writes a run record with
//! content digests of all inputs and outputs; rerunning a step on
//! identical inputs reproduces the digests and output bytes exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, normalize_text, save_corpus, tokenize, CorpusError, TokenSeq};
use crate::dedomain::{dedomain_corpus, DedomainReport, Matcher};
use crate::dictionary::{
    dictionary_stats, emit_extraction_prompts, load_dictionary, merge_dictionaries,
    save_dictionary, DictionaryError, DomainDictionary, PromptTemplate, Provenance,
};
use crate::lm::{
    adapt_lm, load_any_lm, load_lm, perplexity, save_adapted_lm, save_lm, train_lm,
    LanguageModel, LmConfig, LmError,
};
use crate::metrics::{
    bleu_scores, dist_n, embedding_scores, load_vectors, ppl_from_logprobs, report_aggregate,
    rouge_l, EvalPair, MetricReport, MetricValues, MetricsError,
};
use crate::pipeline::{
    build_manifest, load_template_spec, mix_corpora, sample_lowres, save_manifest, sha256_file,
    synthesize_corpora, PipelineError, PipelineWarning, SamplePlan, SampleSize,
};
use crate::similarity::{
    build_profile, load_profile, save_profile, similarity_table, NgramProfile, SimilarityError,
    SimilarityTable, WeightMode,
};

/// Seed applied when neither flags nor the config file give one.
pub const DEFAULT_SEED: u64 = 12345;

/// Environment variable naming the default data directory. When set,
/// relative paths are resolved inside it.
pub const DATA_DIR_ENV: &str = "AMDG_DATA_DIR";

/// Errors surfaced by the command-line layer. Module errors pass
/// through verbatim; [`CliError::module`] names their origin for the
/// machine-readable error record.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("input path does not exist: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// The module an error originated in, for the error record.
    pub fn module(&self) -> &'static str {
        match self {
            CliError::Corpus(_) => "corpus",
            CliError::Dictionary(_) => "dictionary",
            CliError::Similarity(_) => "similarity",
            CliError::Pipeline(_) => "pipeline",
            CliError::Lm(_) => "lm",
            CliError::Metrics(_) => "metrics",
            CliError::MissingInput(_) | CliError::Usage(_) | CliError::Io { .. } => "cli",
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

// ---------------------------------------------------------------------
// Canonical JSON rendering
// ---------------------------------------------------------------------

/// 0..100 metric keys rendered with two decimals.
const METRIC_KEYS: [&str; 16] = [
    "ave",
    "bi",
    "bleu-1",
    "bleu-2",
    "bleu-3",
    "bleu-4",
    "coverage",
    "dist-1",
    "dist-2",
    "embed-average",
    "embed-extrema",
    "embed-greedy",
    "quad",
    "rouge-l",
    "tri",
    "uni",
];

/// Perplexity keys rendered with four decimals.
const PPL_KEYS: [&str; 2] = ["ppl", "valid-ppl"];

fn format_number(key: &str, number: &serde_json::Number) -> String {
    if let Some(i) = number.as_i64() {
        return i.to_string();
    }
    if let Some(u) = number.as_u64() {
        return u.to_string();
    }
    let value = number.as_f64().expect("JSON number is i64, u64, or f64");
    if PPL_KEYS.contains(&key) {
        format!("{value:.4}")
    } else if METRIC_KEYS.contains(&key) {
        format!("{value:.2}")
    } else {
        format!("{value}")
    }
}

fn write_canonical(out: &mut String, key: &str, value: &serde_json::Value, indent: usize) {
    let pad = "  ".repeat(indent);
    let inner = "  ".repeat(indent + 1);
    match value {
        serde_json::Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                let _ = write!(out, "{inner}{}: ", serde_json::Value::String(k.clone()));
                write_canonical(out, k, v, indent + 1);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            let _ = write!(out, "{pad}}}");
        }
        serde_json::Value::Object(_) => out.push_str("{}"),
        serde_json::Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&inner);
                write_canonical(out, key, item, indent + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            let _ = write!(out, "{pad}]");
        }
        serde_json::Value::Array(_) => out.push_str("[]"),
        serde_json::Value::Number(number) => out.push_str(&format_number(key, number)),
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

/// Render any serializable value as canonical JSON: keys sorted
/// (`serde_json` maps are ordered), 0..100 metrics fixed to two
/// decimals, perplexities to four, stable indentation. Rendering the
/// same value twice produces identical bytes.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = String::new();
    write_canonical(&mut out, "", &value, 0);
    out
}

/// The machine-readable failure record printed to stderr: one line,
/// `{"error":{"message":…,"module":…}}`.
pub fn render_error_record(error: &CliError) -> String {
    serde_json::json!({
        "error": {
            "message": error.to_string(),
            "module": error.module(),
        }
    })
    .to_string()
}

/// Render a metric report as a two-line fixed-width table in the
/// conventional column order: BLEU-1..4, Rouge-L, Dist-1, Dist-2,
/// Embed A/E/G, AVE, PPL.
pub fn render_report_table(report: &MetricReport) -> String {
    let headers = [
        "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "Rouge-L", "Dist-1", "Dist-2", "Embed-A",
        "Embed-E", "Embed-G", "AVE", "PPL",
    ];
    let values = [
        format!("{:.2}", report.bleu_1),
        format!("{:.2}", report.bleu_2),
        format!("{:.2}", report.bleu_3),
        format!("{:.2}", report.bleu_4),
        format!("{:.2}", report.rouge_l),
        format!("{:.2}", report.dist_1),
        format!("{:.2}", report.dist_2),
        format!("{:.2}", report.embed_average),
        format!("{:.2}", report.embed_extrema),
        format!("{:.2}", report.embed_greedy),
        format!("{:.2}", report.ave),
        report
            .ppl
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "-".to_string()),
    ];
    render_rows(&headers, std::slice::from_ref(&values))
}

/// Render a similarity table: one `O2<domain>` row per domain, columns
/// Uni/Bi/Tri/Quad. Rows with an empty reference level are starred.
pub fn render_similarity_table(table: &SimilarityTable) -> String {
    let headers = ["Pair", "Uni", "Bi", "Tri", "Quad"];
    let rows: Vec<[String; 5]> = table
        .rows
        .iter()
        .map(|row| {
            let star = if row.empty_reference { "*" } else { "" };
            [
                format!("O2{}{star}", row.domain),
                format!("{:.2}", row.uni),
                format!("{:.2}", row.bi),
                format!("{:.2}", row.tri),
                format!("{:.2}", row.quad),
            ]
        })
        .collect();
    let mut out = render_rows(&headers, &rows);
    if table.rows.iter().any(|r| r.empty_reference) {
        out.push_str("\n* some reference level had no n-grams");
    }
    out
}

fn render_rows<const N: usize>(headers: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths: [usize; N] = [0; N];
    for (i, h) in headers.iter().enumerate() {
        widths[i] = h.chars().count();
    }
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (i, h) in headers.iter().enumerate() {
        if i > 0 {
            out.push_str("  ");
        }
        let _ = write!(out, "{h:>w$}", w = widths[i]);
    }
    for row in rows {
        out.push('\n');
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:>w$}", w = widths[i]);
        }
    }
    out
}

// ---------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------

/// Corpus de-domaining toolkit: dictionary construction, placeholder
/// replacement, similarity profiling, low-resource sampling, two-stage
/// n-gram language modeling, and generation metrics.
#[derive(Debug, Parser)]
#[command(name = "amdg", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a domain dictionary from term files, or emit extraction prompts.
    BuildDict(BuildDictArgs),
    /// Replace dictionary terms with the placeholder across corpora.
    Dedomain(DedomainArgs),
    /// Dictionary-versus-corpus statistics (keywords, coverage, tokens).
    Stats(StatsArgs),
    /// Cross-domain n-gram similarity table.
    Similarity(SimilarityArgs),
    /// Deterministic low-resource sample of a target-domain corpus.
    Sample(SampleArgs),
    /// Interleave corpora into one mixed corpus, optionally excluding a domain.
    Mix(MixArgs),
    /// Digest-pinned manifest of a two-stage training run.
    Manifest(ManifestArgs),
    /// Train an n-gram language model on a corpus.
    TrainLm(TrainLmArgs),
    /// Interpolate a base model with target-domain counts, tuning λ on validation data.
    AdaptLm(AdaptLmArgs),
    /// Perplexity of a model on a corpus, or from a log-probability file.
    Ppl(PplArgs),
    /// Score hypotheses against references with the full metric suite.
    Evaluate(EvaluateArgs),
    /// Generate synthetic multi-domain corpora from a template file.
    Synth(SynthArgs),
}

#[derive(Debug, Default, Args)]
struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = false)]
    config: Option<PathBuf>,
    /// Write a run record (config echo, input/output digests) here.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildDictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus the dictionary is for (used by --emit-prompts).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Domain label of the dictionary.
    #[arg(long)]
    domain: Option<String>,
    /// Term files to ingest; repeatable.
    #[arg(long = "terms")]
    terms: Vec<PathBuf>,
    /// Provenance for terms without an explicit label: llm, termbank, or manual.
    #[arg(long)]
    provenance: Option<String>,
    /// Where to write the dictionary.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write one keyword-extraction prompt per example to this file.
    #[arg(long)]
    emit_prompts: Option<PathBuf>,
    /// Prompt wording: "chinese", "english", or a custom template with
    /// $Context$ and $Domain$ slots.
    #[arg(long)]
    prompt_template: Option<String>,
}

#[derive(Debug, Args)]
struct DedomainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus to de-domain; repeatable.
    #[arg(long = "corpus")]
    corpus: Vec<PathBuf>,
    /// Dictionary file, as PATH (domain taken from the corpus) or DOMAIN=PATH; repeatable.
    #[arg(long = "dict")]
    dict: Vec<String>,
    /// Output corpus path (single input corpus only).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output directory; each corpus keeps its file name.
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// Write the full replacement report (per-example spans) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus to scan.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Dictionary file, as PATH or DOMAIN=PATH; repeatable.
    #[arg(long = "dict")]
    dict: Vec<String>,
}

#[derive(Debug, Args)]
struct SimilarityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus to profile; repeatable.
    #[arg(long = "corpus")]
    corpus: Vec<PathBuf>,
    /// Previously saved profile; repeatable. May be mixed with --corpus.
    #[arg(long = "profile")]
    profiles: Vec<PathBuf>,
    /// Highest n-gram order to profile.
    #[arg(long)]
    max_n: Option<usize>,
    /// Overlap weighting: "type" or "token".
    #[arg(long)]
    mode: Option<String>,
    /// Output form: "table" or "json".
    #[arg(long)]
    format: Option<String>,
    /// Also write the rendered output here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Save computed profiles into this directory as <domain>.profile.
    #[arg(long)]
    save_profiles: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus to sample from.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Expected target domain; defaults to the corpus's own label.
    #[arg(long)]
    domain: Option<String>,
    /// Absolute sample size.
    #[arg(long)]
    size: Option<usize>,
    /// Sample ratio in (0, 1].
    #[arg(long)]
    ratio: Option<f64>,
    /// PRNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the sampled corpus.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MixArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corpus to include; repeatable.
    #[arg(long = "corpus")]
    corpus: Vec<PathBuf>,
    /// Domain label to leave out of the mixture.
    #[arg(long)]
    exclude: Option<String>,
    /// Where to write the mixed corpus.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ManifestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target domain the run adapts to.
    #[arg(long)]
    target: Option<String>,
    /// Stage-1 input corpus; repeatable.
    #[arg(long = "stage1")]
    stage1: Vec<PathBuf>,
    /// Dictionary used for de-domaining; repeatable.
    #[arg(long = "dict")]
    dict: Vec<PathBuf>,
    /// The mixed stage-1 corpus.
    #[arg(long)]
    mixed: Option<PathBuf>,
    /// The low-resource target corpus.
    #[arg(long)]
    target_corpus: Option<PathBuf>,
    /// Label for what stage 2 initializes from (e.g. a model path).
    #[arg(long)]
    init_from: Option<String>,
    /// Low-resource ratios the run covers, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
    /// PRNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the manifest.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainLmArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Maximum n-gram order.
    #[arg(long)]
    order: Option<usize>,
    /// Absolute discount in (0, 1).
    #[arg(long)]
    discount: Option<f64>,
    /// Tokens seen fewer times than this become <unk>.
    #[arg(long)]
    min_count: Option<u64>,
    /// Where to write the model.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AdaptLmArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Stage-1 base model file.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Target-domain training corpus.
    #[arg(long)]
    target_train: Option<PathBuf>,
    /// Validation corpus for choosing λ.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// λ grid, comma-separated values in [0, 1].
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Where to write the adapted model.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PplArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model file (plain or adapted); requires --corpus.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Corpus to evaluate the model on.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Per-token log-probability file (alternative to --model).
    #[arg(long)]
    logprobs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Hypothesis file: one utterance per line.
    #[arg(long)]
    hypotheses: Option<PathBuf>,
    /// Reference file: one utterance per line, aligned with --hypotheses.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Word-vector file for the embedding metrics.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Per-token log-probability file; adds PPL to the report.
    #[arg(long)]
    logprobs: Option<PathBuf>,
    /// Output form: "json" or "table".
    #[arg(long)]
    format: Option<String>,
    /// Also write the rendered report here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Template file: domains, lexicons, and dialogue templates.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Examples to generate per domain.
    #[arg(long)]
    count: Option<usize>,
    /// PRNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the generated <domain>.jsonl files.
    #[arg(long)]
    outdir: Option<PathBuf>,
}

// ---------------------------------------------------------------------
// Config file sections
// ---------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    seed: Option<u64>,
    build_dict: Option<BuildDictSection>,
    dedomain: Option<DedomainSection>,
    stats: Option<StatsSection>,
    similarity: Option<SimilaritySection>,
    sample: Option<SampleSection>,
    mix: Option<MixSection>,
    manifest: Option<ManifestSection>,
    train_lm: Option<TrainLmSection>,
    adapt_lm: Option<AdaptLmSection>,
    ppl: Option<PplSection>,
    evaluate: Option<EvaluateSection>,
    synth: Option<SynthSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct BuildDictSection {
    corpus: Option<PathBuf>,
    domain: Option<String>,
    terms: Option<Vec<PathBuf>>,
    provenance: Option<String>,
    output: Option<PathBuf>,
    emit_prompts: Option<PathBuf>,
    prompt_template: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct DedomainSection {
    corpus: Option<Vec<PathBuf>>,
    dict: Option<Vec<String>>,
    output: Option<PathBuf>,
    outdir: Option<PathBuf>,
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct StatsSection {
    corpus: Option<PathBuf>,
    dict: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SimilaritySection {
    corpus: Option<Vec<PathBuf>>,
    profile: Option<Vec<PathBuf>>,
    max_n: Option<usize>,
    mode: Option<String>,
    format: Option<String>,
    output: Option<PathBuf>,
    save_profiles: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SampleSection {
    corpus: Option<PathBuf>,
    domain: Option<String>,
    size: Option<usize>,
    ratio: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct MixSection {
    corpus: Option<Vec<PathBuf>>,
    exclude: Option<String>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ManifestSection {
    target: Option<String>,
    stage1: Option<Vec<PathBuf>>,
    dict: Option<Vec<PathBuf>>,
    mixed: Option<PathBuf>,
    target_corpus: Option<PathBuf>,
    init_from: Option<String>,
    ratios: Option<Vec<f64>>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct TrainLmSection {
    corpus: Option<PathBuf>,
    order: Option<usize>,
    discount: Option<f64>,
    min_count: Option<u64>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct AdaptLmSection {
    base: Option<PathBuf>,
    target_train: Option<PathBuf>,
    valid: Option<PathBuf>,
    grid: Option<Vec<f64>>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct PplSection {
    model: Option<PathBuf>,
    corpus: Option<PathBuf>,
    logprobs: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct EvaluateSection {
    hypotheses: Option<PathBuf>,
    references: Option<PathBuf>,
    vectors: Option<PathBuf>,
    logprobs: Option<PathBuf>,
    format: Option<String>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SynthSection {
    spec: Option<PathBuf>,
    count: Option<usize>,
    seed: Option<u64>,
    outdir: Option<PathBuf>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("config file {}: {e}", path.display())))
}

// ---------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------

/// A dictionary reference: the file path plus the domain it belongs
/// to. Without an explicit domain the corpus's own label is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DictRef {
    pub domain: Option<String>,
    pub path: PathBuf,
}

impl DictRef {
    /// Parses `PATH` or `DOMAIN=PATH`.
    fn parse(spec: &str) -> DictRef {
        match spec.split_once('=') {
            Some((domain, path)) => DictRef {
                domain: Some(domain.to_string()),
                path: PathBuf::from(path),
            },
            None => DictRef {
                domain: None,
                path: PathBuf::from(spec),
            },
        }
    }
}

/// Output form for rendered reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Table,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            other => Err(usage(format!(
                "unknown format {other:?}: expected \"json\" or \"table\""
            ))),
        }
    }
}

/// The fully resolved configuration of one invocation: flags merged
/// over the config file, defaults applied, paths resolved against the
/// data directory. Serializes with a `subcommand` tag for run records.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunConfig {
    #[serde(rename_all = "kebab-case")]
    BuildDict {
        corpus: Option<PathBuf>,
        domain: String,
        terms: Vec<PathBuf>,
        provenance: String,
        output: Option<PathBuf>,
        emit_prompts: Option<PathBuf>,
        prompt_template: String,
    },
    #[serde(rename_all = "kebab-case")]
    Dedomain {
        corpus: Vec<PathBuf>,
        dict: Vec<DictRef>,
        output: Option<PathBuf>,
        outdir: Option<PathBuf>,
        report: Option<PathBuf>,
    },
    #[serde(rename_all = "kebab-case")]
    Stats {
        corpus: PathBuf,
        dict: Vec<DictRef>,
    },
    #[serde(rename_all = "kebab-case")]
    Similarity {
        corpus: Vec<PathBuf>,
        profile: Vec<PathBuf>,
        max_n: usize,
        mode: WeightMode,
        format: OutputFormat,
        output: Option<PathBuf>,
        save_profiles: Option<PathBuf>,
    },
    #[serde(rename_all = "kebab-case")]
    Sample {
        corpus: PathBuf,
        domain: Option<String>,
        size: Option<usize>,
        ratio: Option<f64>,
        seed: u64,
        output: PathBuf,
    },
    #[serde(rename_all = "kebab-case")]
    Mix {
        corpus: Vec<PathBuf>,
        exclude: Option<String>,
        output: PathBuf,
    },
    #[serde(rename_all = "kebab-case")]
    Manifest {
        target: String,
        stage1: Vec<PathBuf>,
        dict: Vec<PathBuf>,
        mixed: PathBuf,
        target_corpus: PathBuf,
        init_from: String,
        ratios: Vec<f64>,
        seed: u64,
        output: PathBuf,
    },
    #[serde(rename_all = "kebab-case")]
    TrainLm {
        corpus: PathBuf,
        order: usize,
        discount: f64,
        min_count: u64,
        output: PathBuf,
    },
    #[serde(rename_all = "kebab-case")]
    AdaptLm {
        base: PathBuf,
        target_train: PathBuf,
        valid: PathBuf,
        grid: Vec<f64>,
        output: PathBuf,
    },
    #[serde(rename_all = "kebab-case")]
    Ppl {
        model: Option<PathBuf>,
        corpus: Option<PathBuf>,
        logprobs: Option<PathBuf>,
    },
    #[serde(rename_all = "kebab-case")]
    Evaluate {
        hypotheses: PathBuf,
        references: PathBuf,
        vectors: PathBuf,
        logprobs: Option<PathBuf>,
        format: OutputFormat,
        output: Option<PathBuf>,
    },
    #[serde(rename_all = "kebab-case")]
    Synth {
        spec: PathBuf,
        count: usize,
        seed: u64,
        outdir: PathBuf,
    },
}

impl RunConfig {
    /// The subcommand name, as typed on the command line.
    pub fn subcommand(&self) -> &'static str {
        match self {
            RunConfig::BuildDict { .. } => "build-dict",
            RunConfig::Dedomain { .. } => "dedomain",
            RunConfig::Stats { .. } => "stats",
            RunConfig::Similarity { .. } => "similarity",
            RunConfig::Sample { .. } => "sample",
            RunConfig::Mix { .. } => "mix",
            RunConfig::Manifest { .. } => "manifest",
            RunConfig::TrainLm { .. } => "train-lm",
            RunConfig::AdaptLm { .. } => "adapt-lm",
            RunConfig::Ppl { .. } => "ppl",
            RunConfig::Evaluate { .. } => "evaluate",
            RunConfig::Synth { .. } => "synth",
        }
    }

    /// Every input path the invocation will read. All are checked for
    /// existence before any work starts.
    pub fn input_paths(&self) -> Vec<&Path> {
        match self {
            RunConfig::BuildDict { corpus, terms, .. } => corpus
                .iter()
                .chain(terms)
                .map(PathBuf::as_path)
                .collect(),
            RunConfig::Dedomain { corpus, dict, .. } => corpus
                .iter()
                .map(PathBuf::as_path)
                .chain(dict.iter().map(|d| d.path.as_path()))
                .collect(),
            RunConfig::Stats { corpus, dict } => std::iter::once(corpus.as_path())
                .chain(dict.iter().map(|d| d.path.as_path()))
                .collect(),
            RunConfig::Similarity {
                corpus, profile, ..
            } => corpus.iter().chain(profile).map(PathBuf::as_path).collect(),
            RunConfig::Sample { corpus, .. } => vec![corpus.as_path()],
            RunConfig::Mix { corpus, .. } => corpus.iter().map(PathBuf::as_path).collect(),
            RunConfig::Manifest {
                stage1,
                dict,
                mixed,
                target_corpus,
                ..
            } => stage1
                .iter()
                .chain(dict)
                .chain([mixed, target_corpus])
                .map(PathBuf::as_path)
                .collect(),
            RunConfig::TrainLm { corpus, .. } => vec![corpus.as_path()],
            RunConfig::AdaptLm {
                base,
                target_train,
                valid,
                ..
            } => vec![base.as_path(), target_train.as_path(), valid.as_path()],
            RunConfig::Ppl {
                model,
                corpus,
                logprobs,
            } => model
                .iter()
                .chain(corpus)
                .chain(logprobs)
                .map(PathBuf::as_path)
                .collect(),
            RunConfig::Evaluate {
                hypotheses,
                references,
                vectors,
                logprobs,
                ..
            } => [hypotheses, references, vectors]
                .into_iter()
                .chain(logprobs)
                .map(PathBuf::as_path)
                .collect(),
            RunConfig::Synth { spec, .. } => vec![spec.as_path()],
        }
    }
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

fn resolve_path(path: PathBuf) -> PathBuf {
    match data_dir() {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn resolve_paths(paths: Vec<PathBuf>) -> Vec<PathBuf> {
    paths.into_iter().map(resolve_path).collect()
}

fn resolve_opt(path: Option<PathBuf>) -> Option<PathBuf> {
    path.map(resolve_path)
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn pick_vec<T>(flag: Vec<T>, file: Option<Vec<T>>) -> Vec<T> {
    if flag.is_empty() {
        file.unwrap_or_default()
    } else {
        flag
    }
}

/// Merge flags over the config file and apply defaults, producing the
/// effective configuration plus the `--record` destination.
pub fn parse_config(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let (common, config) = resolve_command(cli.command)?;
    Ok((config, resolve_opt(common.record)))
}

fn resolve_command(command: Command) -> Result<(CommonArgs, RunConfig), CliError> {
    match command {
        Command::BuildDict(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.build_dict.unwrap_or_default();
            let provenance = args
                .provenance
                .or(section.provenance)
                .unwrap_or_else(|| "termbank".to_string());
            provenance
                .parse::<Provenance>()
                .map_err(|p| usage(format!("unknown provenance {p:?}: expected llm, termbank, or manual")))?;
            let output = resolve_opt(args.output.or(section.output));
            let emit_prompts = resolve_opt(args.emit_prompts.or(section.emit_prompts));
            if output.is_none() && emit_prompts.is_none() {
                return Err(usage("build-dict needs --output and/or --emit-prompts"));
            }
            let corpus = resolve_opt(args.corpus.or(section.corpus));
            if emit_prompts.is_some() && corpus.is_none() {
                return Err(usage("--emit-prompts requires --corpus"));
            }
            let config = RunConfig::BuildDict {
                corpus,
                domain: require(args.domain.or(section.domain), "domain")?,
                terms: resolve_paths(pick_vec(args.terms, section.terms)),
                provenance,
                output,
                emit_prompts,
                prompt_template: args
                    .prompt_template
                    .or(section.prompt_template)
                    .unwrap_or_else(|| "chinese".to_string()),
            };
            Ok((args.common, config))
        }
        Command::Dedomain(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.dedomain.unwrap_or_default();
            let corpus = resolve_paths(pick_vec(args.corpus, section.corpus));
            if corpus.is_empty() {
                return Err(usage("missing required --corpus"));
            }
            let dict: Vec<DictRef> = pick_vec(args.dict, section.dict)
                .iter()
                .map(|s| DictRef::parse(s))
                .map(|d| DictRef {
                    domain: d.domain,
                    path: resolve_path(d.path),
                })
                .collect();
            if dict.is_empty() {
                return Err(usage("missing required --dict"));
            }
            if dict.iter().any(|d| d.domain.is_none()) && corpus.len() > 1 {
                return Err(usage(
                    "with multiple corpora every --dict needs an explicit DOMAIN=PATH",
                ));
            }
            let output = resolve_opt(args.output.or(section.output));
            let outdir = resolve_opt(args.outdir.or(section.outdir));
            match (corpus.len(), &output, &outdir) {
                (1, Some(_), None) | (_, None, Some(_)) => {}
                (_, Some(_), Some(_)) => {
                    return Err(usage("use either --output or --outdir, not both"))
                }
                (1, None, None) => return Err(usage("missing --output (or --outdir)")),
                (_, Some(_), None) => {
                    return Err(usage("--output applies to a single corpus; use --outdir"))
                }
                (_, None, None) => return Err(usage("missing --outdir")),
            }
            let config = RunConfig::Dedomain {
                corpus,
                dict,
                output,
                outdir,
                report: resolve_opt(args.report.or(section.report)),
            };
            Ok((args.common, config))
        }
        Command::Stats(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.stats.unwrap_or_default();
            let dict: Vec<DictRef> = pick_vec(args.dict, section.dict)
                .iter()
                .map(|s| DictRef::parse(s))
                .map(|d| DictRef {
                    domain: d.domain,
                    path: resolve_path(d.path),
                })
                .collect();
            if dict.is_empty() {
                return Err(usage("missing required --dict"));
            }
            let config = RunConfig::Stats {
                corpus: resolve_path(require(args.corpus.or(section.corpus), "corpus")?),
                dict,
            };
            Ok((args.common, config))
        }
        Command::Similarity(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.similarity.unwrap_or_default();
            let corpus = resolve_paths(pick_vec(args.corpus, section.corpus));
            let profile = resolve_paths(pick_vec(args.profiles, section.profile));
            if corpus.len() + profile.len() < 2 {
                return Err(usage("similarity needs at least two --corpus/--profile inputs"));
            }
            let mode = match args.mode.or(section.mode).as_deref() {
                None | Some("type") => WeightMode::Type,
                Some("token") => WeightMode::Token,
                Some(other) => {
                    return Err(usage(format!(
                        "unknown mode {other:?}: expected \"type\" or \"token\""
                    )))
                }
            };
            let format = match args.format.or(section.format) {
                Some(f) => OutputFormat::parse(&f)?,
                None => OutputFormat::Table,
            };
            let max_n = args
                .max_n
                .or(section.max_n)
                .unwrap_or(crate::similarity::DEFAULT_MAX_N);
            if max_n < crate::similarity::DEFAULT_MAX_N {
                return Err(usage(format!(
                    "similarity tables cover n-gram orders 1..={}; --max-n {max_n} is too small",
                    crate::similarity::DEFAULT_MAX_N
                )));
            }
            let config = RunConfig::Similarity {
                corpus,
                profile,
                max_n,
                mode,
                format,
                output: resolve_opt(args.output.or(section.output)),
                save_profiles: resolve_opt(args.save_profiles.or(section.save_profiles)),
            };
            Ok((args.common, config))
        }
        Command::Sample(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.sample.unwrap_or_default();
            let size = args.size.or(section.size);
            let ratio = args.ratio.or(section.ratio);
            match (size, ratio) {
                (Some(_), Some(_)) => {
                    return Err(usage("use either --size or --ratio, not both"))
                }
                (None, None) => return Err(usage("one of --size or --ratio is required")),
                _ => {}
            }
            let config = RunConfig::Sample {
                corpus: resolve_path(require(args.corpus.or(section.corpus), "corpus")?),
                domain: args.domain.or(section.domain),
                size,
                ratio,
                seed: args.seed.or(section.seed).or(file.seed).unwrap_or(DEFAULT_SEED),
                output: resolve_path(require(args.output.or(section.output), "output")?),
            };
            Ok((args.common, config))
        }
        Command::Mix(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.mix.unwrap_or_default();
            let corpus = resolve_paths(pick_vec(args.corpus, section.corpus));
            if corpus.is_empty() {
                return Err(usage("missing required --corpus"));
            }
            let config = RunConfig::Mix {
                corpus,
                exclude: args.exclude.or(section.exclude),
                output: resolve_path(require(args.output.or(section.output), "output")?),
            };
            Ok((args.common, config))
        }
        Command::Manifest(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.manifest.unwrap_or_default();
            let stage1 = resolve_paths(pick_vec(args.stage1, section.stage1));
            if stage1.is_empty() {
                return Err(usage("missing required --stage1"));
            }
            let config = RunConfig::Manifest {
                target: require(args.target.or(section.target), "target")?,
                stage1,
                dict: resolve_paths(pick_vec(args.dict, section.dict)),
                mixed: resolve_path(require(args.mixed.or(section.mixed), "mixed")?),
                target_corpus: resolve_path(require(
                    args.target_corpus.or(section.target_corpus),
                    "target-corpus",
                )?),
                init_from: args.init_from.or(section.init_from).unwrap_or_default(),
                ratios: pick_vec(args.ratios, section.ratios),
                seed: args.seed.or(section.seed).or(file.seed).unwrap_or(DEFAULT_SEED),
                output: resolve_path(require(args.output.or(section.output), "output")?),
            };
            Ok((args.common, config))
        }
        Command::TrainLm(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.train_lm.unwrap_or_default();
            let defaults = LmConfig::default();
            let config = RunConfig::TrainLm {
                corpus: resolve_path(require(args.corpus.or(section.corpus), "corpus")?),
                order: args.order.or(section.order).unwrap_or(defaults.order),
                discount: args
                    .discount
                    .or(section.discount)
                    .unwrap_or(defaults.discount),
                min_count: args
                    .min_count
                    .or(section.min_count)
                    .unwrap_or(defaults.min_count),
                output: resolve_path(require(args.output.or(section.output), "output")?),
            };
            Ok((args.common, config))
        }
        Command::AdaptLm(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.adapt_lm.unwrap_or_default();
            let mut grid = pick_vec(args.grid, section.grid);
            if grid.is_empty() {
                grid = (0..=10).map(|i| i as f64 / 10.0).collect();
            }
            let config = RunConfig::AdaptLm {
                base: resolve_path(require(args.base.or(section.base), "base")?),
                target_train: resolve_path(require(
                    args.target_train.or(section.target_train),
                    "target-train",
                )?),
                valid: resolve_path(require(args.valid.or(section.valid), "valid")?),
                grid,
                output: resolve_path(require(args.output.or(section.output), "output")?),
            };
            Ok((args.common, config))
        }
        Command::Ppl(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.ppl.unwrap_or_default();
            let model = resolve_opt(args.model.or(section.model));
            let corpus = resolve_opt(args.corpus.or(section.corpus));
            let logprobs = resolve_opt(args.logprobs.or(section.logprobs));
            match (&model, &logprobs) {
                (Some(_), Some(_)) => {
                    return Err(usage("use either --model or --logprobs, not both"))
                }
                (None, None) => return Err(usage("one of --model or --logprobs is required")),
                (Some(_), None) if corpus.is_none() => {
                    return Err(usage("--model requires --corpus"))
                }
                _ => {}
            }
            let config = RunConfig::Ppl {
                model,
                corpus,
                logprobs,
            };
            Ok((args.common, config))
        }
        Command::Evaluate(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.evaluate.unwrap_or_default();
            let format = match args.format.or(section.format) {
                Some(f) => OutputFormat::parse(&f)?,
                None => OutputFormat::Json,
            };
            let config = RunConfig::Evaluate {
                hypotheses: resolve_path(require(
                    args.hypotheses.or(section.hypotheses),
                    "hypotheses",
                )?),
                references: resolve_path(require(
                    args.references.or(section.references),
                    "references",
                )?),
                vectors: resolve_path(require(args.vectors.or(section.vectors), "vectors")?),
                logprobs: resolve_opt(args.logprobs.or(section.logprobs)),
                format,
                output: resolve_opt(args.output.or(section.output)),
            };
            Ok((args.common, config))
        }
        Command::Synth(args) => {
            let file = load_file_config(args.common.config.as_deref())?;
            let section = file.synth.unwrap_or_default();
            let config = RunConfig::Synth {
                spec: resolve_path(require(args.spec.or(section.spec), "spec")?),
                count: require(args.count.or(section.count), "count")?,
                seed: args.seed.or(section.seed).or(file.seed).unwrap_or(DEFAULT_SEED),
                outdir: resolve_path(require(args.outdir.or(section.outdir), "outdir")?),
            };
            Ok((args.common, config))
        }
    }
}

// ---------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------

/// What one invocation printed and produced.
#[derive(Debug)]
pub struct Outcome {
    /// Rendered report for stdout (may be empty).
    pub stdout: String,
    /// Human-readable warnings for stderr.
    pub warnings: Vec<String>,
    /// The run record: config echo, digests, timing.
    pub record: RunRecord,
}

/// Provenance record of one invocation. Input and output digests are
/// reproducible; `elapsed_ms` is informational only.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub subcommand: String,
    pub config: RunConfig,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by path.
    pub outputs: BTreeMap<String, String>,
    pub elapsed_ms: u64,
}

struct CmdOutput {
    stdout: String,
    warnings: Vec<String>,
    outputs: Vec<PathBuf>,
}

/// Run one resolved configuration: check inputs, dispatch, digest.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    for path in config.input_paths() {
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
    }
    let mut inputs = BTreeMap::new();
    for path in config.input_paths() {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }

    let started = Instant::now();
    let output = dispatch(config)?;
    let elapsed_ms = started.elapsed().as_millis() as u64;

    let mut outputs = BTreeMap::new();
    for path in &output.outputs {
        outputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    Ok(Outcome {
        stdout: output.stdout,
        warnings: output.warnings,
        record: RunRecord {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: config.subcommand().to_string(),
            config: config.clone(),
            inputs,
            outputs,
            elapsed_ms,
        },
    })
}

fn dispatch(config: &RunConfig) -> Result<CmdOutput, CliError> {
    match config {
        RunConfig::BuildDict { .. } => run_build_dict(config),
        RunConfig::Dedomain { .. } => run_dedomain(config),
        RunConfig::Stats { .. } => run_stats(config),
        RunConfig::Similarity { .. } => run_similarity(config),
        RunConfig::Sample { .. } => run_sample(config),
        RunConfig::Mix { .. } => run_mix(config),
        RunConfig::Manifest { .. } => run_manifest(config),
        RunConfig::TrainLm { .. } => run_train_lm(config),
        RunConfig::AdaptLm { .. } => run_adapt_lm(config),
        RunConfig::Ppl { .. } => run_ppl(config),
        RunConfig::Evaluate { .. } => run_evaluate(config),
        RunConfig::Synth { .. } => run_synth(config),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_dicts_for(
    refs: &[DictRef],
    domain: &str,
    default_provenance: Provenance,
) -> Result<DomainDictionary, CliError> {
    let dicts: Vec<DomainDictionary> = refs
        .iter()
        .filter(|d| d.domain.as_deref().map_or(true, |label| label == domain))
        .map(|d| load_dictionary(&d.path, domain, default_provenance))
        .collect::<Result<_, _>>()?;
    if dicts.is_empty() {
        return Err(usage(format!("no dictionary given for domain {domain:?}")));
    }
    Ok(merge_dictionaries(&dicts)?)
}

fn run_build_dict(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::BuildDict {
        corpus,
        domain,
        terms,
        provenance,
        output,
        emit_prompts,
        prompt_template,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let default_provenance: Provenance = provenance.parse().expect("validated at resolve");
    let mut outputs = Vec::new();
    let mut summary = serde_json::Map::new();
    summary.insert("domain".into(), domain.clone().into());

    if let Some(output) = output {
        let parts: Vec<DomainDictionary> = terms
            .iter()
            .map(|path| load_dictionary(path, domain, default_provenance))
            .collect::<Result<_, _>>()?;
        let dict = if parts.is_empty() {
            DomainDictionary::new(domain)
        } else {
            merge_dictionaries(&parts)?
        };
        save_dictionary(&dict, output)?;
        outputs.push(output.clone());
        summary.insert("entries".into(), dict.len().into());
    }

    if let Some(prompts_path) = emit_prompts {
        let corpus_path = corpus.as_ref().expect("validated at resolve");
        let corpus = load_corpus(corpus_path)?;
        let template = match prompt_template.as_str() {
            "chinese" => PromptTemplate::chinese(),
            "english" => PromptTemplate::english(),
            custom => PromptTemplate::custom(custom),
        };
        let prompts = emit_extraction_prompts(&corpus, domain, &template);
        let mut text = String::new();
        for prompt in &prompts {
            let line = serde_json::to_string(prompt).expect("prompt records serialize");
            text.push_str(&line);
            text.push('\n');
        }
        std::fs::write(prompts_path, text).map_err(io_err(prompts_path))?;
        outputs.push(prompts_path.clone());
        summary.insert("prompts".into(), prompts.len().into());
    }

    Ok(CmdOutput {
        stdout: render_json(&serde_json::Value::Object(summary)),
        warnings: Vec::new(),
        outputs,
    })
}

fn run_dedomain(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Dedomain {
        corpus,
        dict,
        output,
        outdir,
        report,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut full_reports: Vec<(String, String, DedomainReport)> = Vec::new();

    for path in corpus {
        let loaded = load_corpus(path)?;
        let dictionary = load_dicts_for(dict, &loaded.domain, Provenance::Termbank)?;
        let matcher = Matcher::compile(&dictionary);
        let (rewritten, dd_report) = dedomain_corpus(&matcher, &loaded);

        let destination = match (output, outdir) {
            (Some(file), _) => file.clone(),
            (None, Some(dir)) => {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                dir.join(path.file_name().expect("input path names a file"))
            }
            (None, None) => unreachable!("validated at resolve"),
        };
        save_corpus(&rewritten, &destination)?;
        outputs.push(destination);

        summaries.push(serde_json::json!({
            "corpus": path.display().to_string(),
            "domain": loaded.domain,
            "examples": loaded.len(),
            "match-events": dd_report.match_events,
            "replaced-tokens": dd_report.replaced_tokens,
            "examples-touched": dd_report.examples_touched,
        }));
        full_reports.push((path.display().to_string(), loaded.domain.clone(), dd_report));
    }

    if let Some(report_path) = report {
        let body: Vec<serde_json::Value> = full_reports
            .iter()
            .map(|(path, domain, dd)| {
                serde_json::json!({
                    "corpus": path,
                    "domain": domain,
                    "report": dd,
                })
            })
            .collect();
        let mut text = render_json(&body);
        text.push('\n');
        std::fs::write(report_path, text).map_err(io_err(report_path))?;
        outputs.push(report_path.clone());
    }

    Ok(CmdOutput {
        stdout: render_json(&summaries),
        warnings: Vec::new(),
        outputs,
    })
}

fn run_stats(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Stats { corpus, dict } = config else {
        unreachable!("dispatched on variant");
    };
    let loaded = load_corpus(corpus)?;
    let dictionary = load_dicts_for(dict, &loaded.domain, Provenance::Termbank)?;
    let stats = dictionary_stats(&loaded, &dictionary)?;
    let summary = serde_json::json!({
        "domain": loaded.domain,
        "examples": loaded.len(),
        "keyword-count": stats.keyword_count,
        "coverage": stats.coverage * 100.0,
        "replaced-tokens": stats.replaced_tokens,
        "match-events": stats.match_events,
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings: Vec::new(),
        outputs: Vec::new(),
    })
}

fn run_similarity(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Similarity {
        corpus,
        profile,
        max_n,
        mode,
        format,
        output,
        save_profiles,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let mut profiles: Vec<NgramProfile> = Vec::new();
    for path in corpus {
        profiles.push(build_profile(&load_corpus(path)?, *max_n));
    }
    for path in profile {
        profiles.push(load_profile(path)?);
    }
    let table = similarity_table(&profiles, *mode)?;

    let mut outputs = Vec::new();
    if let Some(dir) = save_profiles {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for p in &profiles {
            let path = dir.join(format!("{}.profile", p.domain));
            save_profile(p, &path)?;
            outputs.push(path);
        }
    }

    let rendered = match format {
        OutputFormat::Json => render_json(&table),
        OutputFormat::Table => render_similarity_table(&table),
    };
    if let Some(path) = output {
        std::fs::write(path, format!("{rendered}\n")).map_err(io_err(path))?;
        outputs.push(path.clone());
    }
    Ok(CmdOutput {
        stdout: rendered,
        warnings: Vec::new(),
        outputs,
    })
}

fn run_sample(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Sample {
        corpus,
        domain,
        size,
        ratio,
        seed,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let loaded = load_corpus(corpus)?;
    let plan = SamplePlan {
        target_domain: domain.clone().unwrap_or_else(|| loaded.domain.clone()),
        size: match (size, ratio) {
            (Some(n), None) => SampleSize::Absolute(*n),
            (None, Some(r)) => SampleSize::Ratio(*r),
            _ => unreachable!("validated at resolve"),
        },
        seed: *seed,
    };
    let sampled = sample_lowres(&loaded, &plan)?;
    save_corpus(&sampled, output)?;
    let mut summary = serde_json::Map::new();
    summary.insert("domain".into(), sampled.domain.clone().into());
    summary.insert("population".into(), loaded.len().into());
    summary.insert("sampled".into(), sampled.len().into());
    summary.insert("seed".into(), (*seed).into());
    if let Some(r) = ratio {
        summary.insert("ratio".into(), (*r).into());
    }
    Ok(CmdOutput {
        stdout: render_json(&serde_json::Value::Object(summary)),
        warnings: Vec::new(),
        outputs: vec![output.clone()],
    })
}

fn run_mix(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Mix {
        corpus,
        exclude,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let corpora: Vec<_> = corpus
        .iter()
        .map(|p| load_corpus(p))
        .collect::<Result<_, _>>()?;
    let (mixed, warnings) = mix_corpora(&corpora, exclude.as_deref().unwrap_or(""))?;
    // an absent --exclude is not a failed exclusion
    let warnings: Vec<String> = warnings
        .iter()
        .filter(|w| {
            exclude.is_some() || !matches!(w, PipelineWarning::ExcludeNotFound { .. })
        })
        .map(|w| w.to_string())
        .collect();
    save_corpus(&mixed, output)?;
    let summary = serde_json::json!({
        "domain": mixed.domain,
        "examples": mixed.len(),
        "sources": corpora.len(),
        "excluded": exclude,
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings,
        outputs: vec![output.clone()],
    })
}

fn run_manifest(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Manifest {
        target,
        stage1,
        dict,
        mixed,
        target_corpus,
        init_from,
        ratios,
        seed,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let manifest = build_manifest(&crate::pipeline::ManifestConfig {
        target_domain: target.clone(),
        stage1_inputs: stage1.clone(),
        dictionaries: dict.clone(),
        mixed_corpus: mixed.clone(),
        target_corpus: target_corpus.clone(),
        init_from: init_from.clone(),
        seed: *seed,
        ratios: ratios.clone(),
    })?;
    save_manifest(&manifest, output)?;
    let summary = serde_json::json!({
        "target": target,
        "stage1-inputs": manifest.stage1.inputs.len(),
        "dictionaries": manifest.stage1.dictionaries.len(),
        "output": output.display().to_string(),
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings: Vec::new(),
        outputs: vec![output.clone()],
    })
}

fn run_train_lm(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::TrainLm {
        corpus,
        order,
        discount,
        min_count,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let loaded = load_corpus(corpus)?;
    let lm = train_lm(
        &loaded,
        LmConfig {
            order: *order,
            discount: *discount,
            min_count: *min_count,
        },
    )?;
    save_lm(&lm, output)?;
    let summary = serde_json::json!({
        "domain": loaded.domain,
        "examples": loaded.len(),
        "order": order,
        "vocab": lm.vocab().len(),
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings: Vec::new(),
        outputs: vec![output.clone()],
    })
}

fn run_adapt_lm(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::AdaptLm {
        base,
        target_train,
        valid,
        grid,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let base_lm = load_lm(base)?;
    let train = load_corpus(target_train)?;
    let validation = load_corpus(valid)?;
    let adapted = adapt_lm(&base_lm, &train, &validation, grid)?;
    let valid_ppl = perplexity(&adapted, &validation)?;
    save_adapted_lm(&adapted, output)?;
    let summary = serde_json::json!({
        "lambda": adapted.lambda(),
        "valid-ppl": valid_ppl,
        "grid-size": grid.len(),
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings: Vec::new(),
        outputs: vec![output.clone()],
    })
}

fn run_ppl(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Ppl {
        model,
        corpus,
        logprobs,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let ppl = match (model, logprobs) {
        (Some(model_path), None) => {
            let lm = load_any_lm(model_path)?;
            let corpus_path = corpus.as_ref().expect("validated at resolve");
            perplexity(&lm, &load_corpus(corpus_path)?)?
        }
        (None, Some(logprob_path)) => ppl_from_logprobs(logprob_path)?,
        _ => unreachable!("validated at resolve"),
    };
    Ok(CmdOutput {
        stdout: render_json(&serde_json::json!({ "ppl": ppl })),
        warnings: Vec::new(),
        outputs: Vec::new(),
    })
}

fn read_token_lines(path: &Path) -> Result<Vec<TokenSeq>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(|line| tokenize(&normalize_text(line)))
        .collect())
}

fn run_evaluate(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Evaluate {
        hypotheses,
        references,
        vectors,
        logprobs,
        format,
        output,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let hyp_lines = read_token_lines(hypotheses)?;
    let ref_lines = read_token_lines(references)?;
    if hyp_lines.len() != ref_lines.len() {
        return Err(usage(format!(
            "hypotheses has {} lines but references has {}",
            hyp_lines.len(),
            ref_lines.len()
        )));
    }
    let pairs: Vec<EvalPair> = hyp_lines
        .iter()
        .cloned()
        .zip(ref_lines)
        .map(|(h, r)| EvalPair::new(h, r))
        .collect::<Result<_, _>>()?;

    let (table, vector_warnings) = load_vectors(vectors)?;
    let bleu = bleu_scores(&pairs)?;
    let rouge = rouge_l(&pairs)?;
    let embed = embedding_scores(&pairs, &table)?;
    let values = MetricValues {
        bleu: bleu.scores.map(Some),
        rouge_l: Some(rouge.score),
        dist_1: Some(dist_n(&hyp_lines, 1)?),
        dist_2: Some(dist_n(&hyp_lines, 2)?),
        embed_average: Some(embed.average),
        embed_extrema: Some(embed.extrema),
        embed_greedy: Some(embed.greedy),
        ppl: logprobs
            .as_ref()
            .map(|p| ppl_from_logprobs(p))
            .transpose()?,
    };
    let mut report = report_aggregate(&values)?;
    report
        .digests
        .insert("hypotheses".to_string(), sha256_file(hypotheses)?);
    report
        .digests
        .insert("references".to_string(), sha256_file(references)?);
    report
        .digests
        .insert("vectors".to_string(), sha256_file(vectors)?);
    if let Some(p) = logprobs {
        report.digests.insert("logprobs".to_string(), sha256_file(p)?);
    }
    report.config_echo = Some(serde_json::to_value(config).expect("config serializes"));

    let mut warnings: Vec<String> = vector_warnings.iter().map(|w| w.to_string()).collect();
    if bleu.empty_hypotheses > 0 {
        warnings.push(format!(
            "{} empty hypothesis line(s) scored 0",
            bleu.empty_hypotheses
        ));
    }
    if embed.all_oov_pairs > 0 {
        warnings.push(format!(
            "{} pair(s) with an all-out-of-vocabulary side scored 0",
            embed.all_oov_pairs
        ));
    }

    let rendered = match format {
        OutputFormat::Json => render_json(&report),
        OutputFormat::Table => render_report_table(&report),
    };
    let mut outputs = Vec::new();
    if let Some(path) = output {
        std::fs::write(path, format!("{rendered}\n")).map_err(io_err(path))?;
        outputs.push(path.clone());
    }
    Ok(CmdOutput {
        stdout: rendered,
        warnings,
        outputs,
    })
}

fn run_synth(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let RunConfig::Synth {
        spec,
        count,
        seed,
        outdir,
    } = config
    else {
        unreachable!("dispatched on variant");
    };
    let template_spec = load_template_spec(spec)?;
    let corpora = synthesize_corpora(&template_spec, *count, *seed)?;
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let mut outputs = Vec::new();
    let mut domains = Vec::new();
    for corpus in &corpora {
        let path = outdir.join(format!("{}.jsonl", corpus.domain));
        save_corpus(corpus, &path)?;
        domains.push(corpus.domain.clone());
        outputs.push(path);
    }
    let summary = serde_json::json!({
        "domains": domains,
        "examples-per-domain": count,
        "seed": seed,
    });
    Ok(CmdOutput {
        stdout: render_json(&summary),
        warnings: Vec::new(),
        outputs,
    })
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

/// Parse `std::env::args etc.`, execute, and print; returns the process
/// exit code. Failures print one machine-readable record to stderr.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    run_parsed(cli)
}

/// [`run`] over explicit arguments, for tests.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    run_parsed(cli)
}

// Writes that lose the race against a closed pipe are not failures.
fn say(line: &str) {
    use std::io::Write as _;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn complain(line: &str) {
    use std::io::Write as _;
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn run_parsed(cli: Cli) -> i32 {
    let (config, record_path) = match parse_config(cli) {
        Ok(resolved) => resolved,
        Err(e) => {
            complain(&render_error_record(&e));
            return 1;
        }
    };
    match execute(&config) {
        Ok(outcome) => {
            if !outcome.stdout.is_empty() {
                say(&outcome.stdout);
            }
            for warning in &outcome.warnings {
                complain(&format!("warning: {warning}"));
            }
            if let Some(path) = record_path {
                let text = format!("{}\n", render_json(&outcome.record));
                if let Err(source) = std::fs::write(&path, text) {
                    let e = CliError::Io { path, source };
                    complain(&render_error_record(&e));
                    return 1;
                }
            }
            0
        }
        Err(e) => {
            complain(&render_error_record(&e));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueExample, Split, Utterance};

    fn corpus_file(dir: &Path, name: &str, domain: &str, rows: &[(&str, &str)]) -> PathBuf {
        let examples = rows
            .iter()
            .map(|(c, r)| {
                DialogueExample::new(
                    vec![Utterance::new(c).unwrap()],
                    Utterance::new(r).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let corpus = crate::corpus::Corpus::new(domain, Split::Train, examples).unwrap();
        let path = dir.join(name);
        save_corpus(&corpus, &path).unwrap();
        path
    }

    fn parse(args: &[&str]) -> Result<(RunConfig, Option<PathBuf>), CliError> {
        let mut argv = vec!["amdg"];
        argv.extend_from_slice(args);
        parse_config(Cli::try_parse_from(argv).expect("arguments parse"))
    }

    #[test]
    fn seed_defaults_when_absent() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_file(dir.path(), "c.jsonl", "film", &[("a", "b")]);
        let (config, _) = parse(&[
            "sample",
            "--corpus",
            corpus.to_str().unwrap(),
            "--size",
            "1",
            "--output",
            dir.path().join("out.jsonl").to_str().unwrap(),
        ])
        .unwrap();
        match config {
            RunConfig::Sample { seed, .. } => assert_eq!(seed, DEFAULT_SEED),
            other => panic!("unexpected config: {other:?}"),
        }
    }

    #[test]
    fn flag_overrides_config_file_value() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_file(dir.path(), "c.jsonl", "film", &[("a", "b")]);
        let config_path = dir.path().join("run.json");
        std::fs::write(
            &config_path,
            serde_json::json!({
                "seed": 7,
                "sample": {
                    "corpus": corpus.to_str().unwrap(),
                    "size": 1,
                    "output": dir.path().join("out.jsonl").to_str().unwrap(),
                }
            })
            .to_string(),
        )
        .unwrap();
        let (from_file, _) = parse(&["sample", "--config", config_path.to_str().unwrap()]).unwrap();
        match from_file {
            RunConfig::Sample { seed, .. } => assert_eq!(seed, 7),
            other => panic!("unexpected config: {other:?}"),
        }
        let (overridden, _) = parse(&[
            "sample",
            "--config",
            config_path.to_str().unwrap(),
            "--seed",
            "99",
        ])
        .unwrap();
        match overridden {
            RunConfig::Sample { seed, .. } => assert_eq!(seed, 99),
            other => panic!("unexpected config: {other:?}"),
        }
    }

    #[test]
    fn unknown_config_key_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("run.json");
        std::fs::write(
            &config_path,
            serde_json::json!({"sample": {"sizzle": 3}}).to_string(),
        )
        .unwrap();
        let err = parse(&["sample", "--config", config_path.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("sizzle"), "{err}");
    }

    #[test]
    fn conflicting_size_and_ratio_error() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_file(dir.path(), "c.jsonl", "film", &[("a", "b")]);
        let err = parse(&[
            "sample",
            "--corpus",
            corpus.to_str().unwrap(),
            "--size",
            "1",
            "--ratio",
            "0.5",
            "--output",
            "o.jsonl",
        ])
        .unwrap_err();
        assert!(err.to_string().contains("either --size or --ratio"), "{err}");
    }

    #[test]
    fn similarity_max_n_below_table_width_is_rejected() {
        let err = parse(&[
            "similarity",
            "--corpus",
            "a.jsonl",
            "--corpus",
            "b.jsonl",
            "--max-n",
            "2",
        ])
        .unwrap_err();
        assert!(err.to_string().contains("--max-n 2 is too small"), "{err}");
    }

    #[test]
    fn missing_input_is_reported_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::TrainLm {
            corpus: dir.path().join("absent.jsonl"),
            order: 3,
            discount: 0.75,
            min_count: 1,
            output: dir.path().join("model.lm"),
        };
        let err = execute(&config).unwrap_err();
        assert!(matches!(err, CliError::MissingInput(_)));
        assert_eq!(err.module(), "cli");
        assert!(!dir.path().join("model.lm").exists());
    }

    #[test]
    fn error_record_is_machine_readable() {
        let err = usage("boom");
        let record = render_error_record(&err);
        let value: serde_json::Value = serde_json::from_str(&record).unwrap();
        assert_eq!(value["error"]["module"], "cli");
        assert_eq!(value["error"]["message"], "boom");
    }

    #[test]
    fn canonical_json_sorts_keys_and_fixes_precision() {
        let value = serde_json::json!({
            "zebra": 1,
            "ppl": 2.123456,
            "bleu-1": 33.333333,
            "alpha": {"ratio": 0.05},
        });
        let rendered = render_json(&value);
        let alpha = rendered.find("\"alpha\"").unwrap();
        let bleu = rendered.find("\"bleu-1\"").unwrap();
        let ppl = rendered.find("\"ppl\"").unwrap();
        let zebra = rendered.find("\"zebra\"").unwrap();
        assert!(alpha < bleu && bleu < ppl && ppl < zebra);
        assert!(rendered.contains("\"ppl\": 2.1235"));
        assert!(rendered.contains("\"bleu-1\": 33.33"));
        assert!(rendered.contains("\"ratio\": 0.05"));
        assert_eq!(render_json(&value), rendered);
    }

    #[test]
    fn sample_execute_writes_deterministic_output() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<(String, String)> = (0..10)
            .map(|i| (format!("ctx {i}"), format!("resp {i}")))
            .collect();
        let rows_ref: Vec<(&str, &str)> =
            rows.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let corpus = corpus_file(dir.path(), "c.jsonl", "film", &rows_ref);
        let out1 = dir.path().join("s1.jsonl");
        let out2 = dir.path().join("s2.jsonl");
        for out in [&out1, &out2] {
            let config = RunConfig::Sample {
                corpus: corpus.clone(),
                domain: None,
                size: Some(3),
                ratio: None,
                seed: DEFAULT_SEED,
                output: out.clone(),
            };
            let outcome = execute(&config).unwrap();
            assert_eq!(outcome.record.subcommand, "sample");
            assert_eq!(outcome.record.outputs.len(), 1);
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap()
        );
    }

    #[test]
    fn ppl_mode_conflicts_are_usage_errors() {
        let err = parse(&["ppl"]).unwrap_err();
        assert!(err.to_string().contains("--model or --logprobs"), "{err}");
        let err = parse(&["ppl", "--model", "m.lm"]).unwrap_err();
        assert!(err.to_string().contains("requires --corpus"), "{err}");
    }

    #[test]
    fn data_dir_resolves_relative_paths() {
        let resolved = {
            let _guard = EnvGuard::set(DATA_DIR_ENV, "/data/root");
            resolve_path(PathBuf::from("corpus.jsonl"))
        };
        assert_eq!(resolved, PathBuf::from("/data/root/corpus.jsonl"));
        let absolute = {
            let _guard = EnvGuard::set(DATA_DIR_ENV, "/data/root");
            resolve_path(PathBuf::from("/abs/corpus.jsonl"))
        };
        assert_eq!(absolute, PathBuf::from("/abs/corpus.jsonl"));
    }

    /// Restores an environment variable on drop.
    struct EnvGuard {
        key: &'static str,
        previous: Option<std::ffi::OsString>,
    }

    impl EnvGuard {
        fn set(key: &'static str, value: &str) -> Self {
            let previous = std::env::var_os(key);
            std::env::set_var(key, value);
            EnvGuard { key, previous }
        }
    }

    impl Drop for EnvGuard {
        fn drop(&mut self) {
            match &self.previous {
                Some(v) => std::env::set_var(self.key, v),
                None => std::env::remove_var(self.key),
            }
        }
    }

    #[test]
    fn evaluate_identity_reports_all_hundreds() {
        let dir = tempfile::tempdir().unwrap();
        let hyp = dir.path().join("hyp.txt");
        let refs = dir.path().join("ref.txt");
        let vec_path = dir.path().join("vectors.txt");
        std::fs::write(&hyp, "alpha beta\ngamma alpha\n").unwrap();
        std::fs::write(&refs, "alpha beta\ngamma alpha\n").unwrap();
        std::fs::write(&vec_path, "alpha 1 0 0\nbeta 0 1 0\ngamma 0 0 1\n").unwrap();
        let config = RunConfig::Evaluate {
            hypotheses: hyp,
            references: refs,
            vectors: vec_path,
            logprobs: None,
            format: OutputFormat::Json,
            output: None,
        };
        let outcome = execute(&config).unwrap();
        let value: serde_json::Value = serde_json::from_str(&outcome.stdout).unwrap();
        for key in [
            "bleu-1",
            "bleu-4",
            "rouge-l",
            "embed-average",
            "embed-extrema",
            "embed-greedy",
        ] {
            assert_eq!(value[key], 100.0, "{key}");
        }
        assert!(value.get("ppl").is_none());
        assert_eq!(value["digests"].as_object().unwrap().len(), 3);
    }

    #[test]
    fn similarity_identical_corpora_score_100() {
        let dir = tempfile::tempdir().unwrap();
        let a = corpus_file(dir.path(), "a.jsonl", "a", &[("p q r s t", "u v w x")]);
        let b = corpus_file(dir.path(), "b.jsonl", "b", &[("p q r s t", "u v w x")]);
        let config = RunConfig::Similarity {
            corpus: vec![a, b],
            profile: Vec::new(),
            max_n: 4,
            mode: WeightMode::Type,
            format: OutputFormat::Json,
            output: None,
            save_profiles: None,
        };
        let outcome = execute(&config).unwrap();
        let value: serde_json::Value = serde_json::from_str(&outcome.stdout).unwrap();
        for row in value["rows"].as_array().unwrap() {
            for key in ["uni", "bi", "tri", "quad"] {
                assert_eq!(row[key], 100.0, "{key}");
            }
        }
    }

    #[test]
    fn render_table_orders_metric_columns() {
        let report = MetricReport {
            bleu_1: 1.0,
            bleu_2: 2.0,
            bleu_3: 3.0,
            bleu_4: 4.0,
            rouge_l: 5.0,
            dist_1: 6.0,
            dist_2: 7.0,
            embed_average: 8.0,
            embed_extrema: 9.0,
            embed_greedy: 10.0,
            ave: 5.5,
            ppl: Some(2.25),
            digests: BTreeMap::new(),
            config_echo: None,
        };
        let table = render_report_table(&report);
        let header = table.lines().next().unwrap();
        let expected = [
            "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "Rouge-L", "Dist-1", "Dist-2", "Embed-A",
            "Embed-E", "Embed-G", "AVE", "PPL",
        ];
        let mut last = 0;
        for name in expected {
            let pos = header.find(name).expect(name);
            assert!(pos >= last, "{name} out of order");
            last = pos;
        }
        assert!(table.contains("2.2500"));
    }
}
