//! Automatic evaluation metrics for generated dialogue responses.
//!
//! Covers the standard surface and semantic metrics used to score a
//! generation system against references:
//!
//! * BLEU-1..4: sentence-level smoothed n-gram precision with brevity
//!   penalty, averaged over the corpus ([`bleu_scores`]).
//! * ROUGE-L: longest-common-subsequence F1 ([`rouge_l`]).
//! * Dist-1/Dist-2: corpus-level n-gram diversity ([`dist_n`]).
//! * Embedding Average / Extrema / Greedy: cosine similarities over
//!   pretrained word vectors ([`embedding_scores`], [`load_vectors`]).
//! * Perplexity ingestion from per-token log-probability files produced
//!   by external models ([`ppl_from_logprobs`]).
//!
//! All scores except perplexity are reported on a 0..100 scale.
//! [`report_aggregate`] folds the ten surface/semantic metrics into a
//! [`MetricReport`] whose `ave` field is their unweighted mean.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;

/// Highest n-gram order used by BLEU.
pub const MAX_BLEU_ORDER: usize = 4;

/// Numerator substituted for a zero n-gram match count in BLEU so the
/// geometric mean stays finite.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Vector dimensionality assumed when a vector file carries no header
/// and no rows.
pub const DEFAULT_VECTOR_DIM: usize = 300;

/// Errors produced by metric computations and file ingestion.
#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("metric requires at least one hypothesis/reference pair")]
    EmptyPairs,
    #[error("reference side of an evaluation pair must be nonempty")]
    EmptyReference,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("no {n}-grams found in any hypothesis")]
    NoNgrams { n: usize },
    #[error("vector for {token:?} has dimension {found}, table expects {expected}")]
    DimensionMismatch {
        token: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: {message}")]
    MalformedVector {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    MalformedLogprob {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: log-probability {value} is positive")]
    PositiveLogprob {
        path: String,
        line: usize,
        value: f64,
    },
    #[error("log-probability file contains no records")]
    EmptyLogprobs,
    #[error("metric {name:?} is missing from the aggregate input")]
    MissingMetric { name: String },
    #[error("metric {name:?} value {value} is outside [0,100]")]
    MetricOutOfRange { name: String, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One hypothesis/reference pair.
///
/// The reference must be nonempty; an empty hypothesis is allowed and
/// scored as 0 by every pair-level metric, with the pair counted in the
/// metric's flagged total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    hypothesis: TokenSeq,
    reference: TokenSeq,
}

impl EvalPair {
    /// Builds a pair, rejecting an empty reference.
    pub fn new(hypothesis: TokenSeq, reference: TokenSeq) -> Result<Self, MetricsError> {
        if reference.is_empty() {
            return Err(MetricsError::EmptyReference);
        }
        Ok(EvalPair {
            hypothesis,
            reference,
        })
    }

    pub fn hypothesis(&self) -> &TokenSeq {
        &self.hypothesis
    }

    pub fn reference(&self) -> &TokenSeq {
        &self.reference
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], u64> {
    let mut counts: BTreeMap<&[String], u64> = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU-1..4 over a pair list, plus the number of empty hypotheses that
/// were scored 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuScores {
    /// `scores[k-1]` is BLEU-k on the 0..100 scale.
    pub scores: [f64; MAX_BLEU_ORDER],
    pub empty_hypotheses: usize,
}

/// Sentence-level smoothed BLEU, averaged over the corpus.
///
/// Per pair, modified n-gram precision `p_n` clips each hypothesis
/// n-gram count at its reference count; a zero numerator is replaced by
/// [`BLEU_EPSILON`]. BLEU-k is the brevity-penalised geometric mean of
/// `p_1..p_k` with uniform weights, where orders above the hypothesis
/// length are dropped so an exact copy scores 100 at every k. The
/// brevity penalty is `exp(1 - r/c)` when the hypothesis length `c`
/// does not exceed the reference length `r`, else 1. The corpus score
/// is the mean over pairs, scaled to 0..100.
///
/// Empty hypotheses contribute 0 to every order and are counted in
/// `empty_hypotheses`.
pub fn bleu_scores(pairs: &[EvalPair]) -> Result<BleuScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyPairs);
    }
    let mut sums = [0.0; MAX_BLEU_ORDER];
    let mut empty = 0usize;
    for pair in pairs {
        let hyp = pair.hypothesis.as_slice();
        let reference = pair.reference.as_slice();
        if hyp.is_empty() {
            empty += 1;
            continue;
        }
        let cap = hyp.len().min(MAX_BLEU_ORDER);
        let mut log_precisions = Vec::with_capacity(cap);
        for n in 1..=cap {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(reference, n);
            let total: u64 = hyp_counts.values().sum();
            let clipped: u64 = hyp_counts
                .iter()
                .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum();
            let numerator = if clipped == 0 {
                BLEU_EPSILON
            } else {
                clipped as f64
            };
            log_precisions.push((numerator / total as f64).ln());
        }
        let brevity = if hyp.len() > reference.len() {
            1.0
        } else {
            (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
        };
        for k in 1..=MAX_BLEU_ORDER {
            let effective = k.min(cap);
            let mean_log: f64 =
                log_precisions[..effective].iter().sum::<f64>() / effective as f64;
            sums[k - 1] += brevity * mean_log.exp();
        }
    }
    let mut scores = [0.0; MAX_BLEU_ORDER];
    for k in 0..MAX_BLEU_ORDER {
        scores[k] = 100.0 * sums[k] / pairs.len() as f64;
    }
    Ok(BleuScores {
        scores,
        empty_hypotheses: empty,
    })
}

/// ROUGE-L over a pair list, plus the number of empty hypotheses that
/// were scored 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RougeLScore {
    /// Mean LCS F1 on the 0..100 scale.
    pub score: f64,
    pub empty_hypotheses: usize,
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            current[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Longest-common-subsequence F1, averaged over the corpus.
///
/// Per pair, recall is `LCS / |reference|`, precision is `LCS /
/// |hypothesis|`, and the pair score is their harmonic mean (0 when the
/// LCS is empty). The corpus score is the mean over pairs, scaled to
/// 0..100. Empty hypotheses score 0 and are counted.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<RougeLScore, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyPairs);
    }
    let mut sum = 0.0;
    let mut empty = 0usize;
    for pair in pairs {
        let hyp = pair.hypothesis.as_slice();
        let reference = pair.reference.as_slice();
        if hyp.is_empty() {
            empty += 1;
            continue;
        }
        let lcs = lcs_len(hyp, reference) as f64;
        if lcs > 0.0 {
            let precision = lcs / hyp.len() as f64;
            let recall = lcs / reference.len() as f64;
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(RougeLScore {
        score: 100.0 * sum / pairs.len() as f64,
        empty_hypotheses: empty,
    })
}

/// Corpus-level n-gram diversity: distinct n-grams divided by total
/// n-gram occurrences across all hypotheses, scaled to 0..100.
///
/// N-grams never cross hypothesis boundaries. Duplicating a hypothesis
/// can only lower the score: the distinct set is unchanged while the
/// total grows.
pub fn dist_n(hypotheses: &[TokenSeq], n: usize) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidOrder);
    }
    let mut distinct: BTreeMap<&[String], ()> = BTreeMap::new();
    let mut total = 0u64;
    for hyp in hypotheses {
        let tokens = hyp.as_slice();
        if tokens.len() >= n {
            for window in tokens.windows(n) {
                distinct.insert(window, ());
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(MetricsError::NoNgrams { n });
    }
    Ok(100.0 * distinct.len() as f64 / total as f64)
}

/// Immutable token-to-vector table with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl VectorTable {
    /// Empty table expecting vectors of dimension `dim`.
    pub fn new(dim: usize) -> Self {
        VectorTable {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Inserts a vector, rejecting a dimension mismatch. Returns whether
    /// an existing entry was replaced.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<bool, MetricsError> {
        if vector.len() != self.dim {
            return Err(MetricsError::DimensionMismatch {
                token: token.to_string(),
                expected: self.dim,
                found: vector.len(),
            });
        }
        Ok(self.vectors.insert(token.to_string(), vector).is_some())
    }

    /// Tokens in sorted order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

/// Non-fatal condition noticed while loading a vector file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorWarning {
    /// The same token appeared more than once; the later row won.
    DuplicateToken { token: String, line: usize },
}

impl fmt::Display for VectorWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorWarning::DuplicateToken { token, line } => {
                write!(f, "line {line}: duplicate vector for {token:?}, keeping the later row")
            }
        }
    }
}

/// Loads a word-vector table from text format.
///
/// The format is one token followed by its space-separated decimal
/// components per line. A first line consisting of exactly two
/// integers is read as a `count dim` header; the declared dimension
/// then binds every row. Without a header the first data row fixes the
/// dimension, and an empty file yields an empty table of
/// [`DEFAULT_VECTOR_DIM`]. Rows whose component count disagrees fail
/// with their line number. Duplicate tokens keep the later row and are
/// reported as warnings.
pub fn load_vectors(
    path: impl AsRef<Path>,
) -> Result<(VectorTable, Vec<VectorWarning>), MetricsError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut table: Option<VectorTable> = None;
    let mut warnings = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if number == 1 && fields.len() == 2 {
            if let (Ok(_count), Ok(dim)) =
                (fields[0].parse::<usize>(), fields[1].parse::<usize>())
            {
                table = Some(VectorTable::new(dim));
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(MetricsError::MalformedVector {
                path: display,
                line: number,
                message: "expected a token followed by vector components".to_string(),
            });
        }
        let token = fields[0];
        let components: Result<Vec<f64>, _> =
            fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let components = components.map_err(|e| MetricsError::MalformedVector {
            path: display.clone(),
            line: number,
            message: format!("bad vector component: {e}"),
        })?;
        let table = table.get_or_insert_with(|| VectorTable::new(components.len()));
        if components.len() != table.dim() {
            return Err(MetricsError::MalformedVector {
                path: display,
                line: number,
                message: format!(
                    "row has {} components, expected {}",
                    components.len(),
                    table.dim()
                ),
            });
        }
        if table.insert(token, components)? {
            warnings.push(VectorWarning::DuplicateToken {
                token: token.to_string(),
                line: number,
            });
        }
    }
    Ok((
        table.unwrap_or_else(|| VectorTable::new(DEFAULT_VECTOR_DIM)),
        warnings,
    ))
}

/// Writes a vector table in the text format read by [`load_vectors`],
/// with a `count dim` header and tokens in sorted order.
pub fn save_vectors(table: &VectorTable, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for token in table.tokens() {
        let vector = table.get(token).expect("token listed by the table");
        write!(out, "{token}")?;
        for component in vector {
            write!(out, " {component}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Embedding-based scores over a pair list, plus the number of pairs
/// with an entirely out-of-vocabulary side.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingScores {
    pub average: f64,
    pub extrema: f64,
    pub greedy: f64,
    pub all_oov_pairs: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    // identical sides are exactly parallel; the sqrt round-trip would
    // otherwise land a hair under 1
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

fn side_vectors<'a>(tokens: &[String], table: &'a VectorTable) -> Vec<&'a [f64]> {
    tokens.iter().filter_map(|t| table.get(t)).collect()
}

fn mean_vector(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for vector in vectors {
        for (slot, component) in mean.iter_mut().zip(*vector) {
            *slot += component;
        }
    }
    for slot in &mut mean {
        *slot /= vectors.len() as f64;
    }
    mean
}

fn extrema_vector(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut extrema: Vec<f64> = vec![0.0; dim];
    for vector in vectors {
        for (slot, component) in extrema.iter_mut().zip(*vector) {
            if component.abs() > (*slot).abs() {
                *slot = *component;
            }
        }
    }
    extrema
}

fn greedy_direction(from: &[&[f64]], to: &[&[f64]]) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| cosine(a, b))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    sum / from.len() as f64
}

/// Embedding Average, Extrema, and Greedy with negative cosines clipped
/// to 0. See [`embedding_scores_with`] for the unclipped variant.
pub fn embedding_scores(
    pairs: &[EvalPair],
    table: &VectorTable,
) -> Result<EmbeddingScores, MetricsError> {
    embedding_scores_with(pairs, table, true)
}

/// Embedding Average, Extrema, and Greedy over a pair list.
///
/// Out-of-vocabulary tokens are skipped on both sides. A pair whose
/// hypothesis or reference is entirely out of vocabulary scores 0 on
/// all three metrics and is counted in `all_oov_pairs`. Per pair:
///
/// * Average: cosine of the two mean vectors.
/// * Extrema: cosine of the per-dimension signed extrema (the
///   component with the largest magnitude across the side's tokens).
/// * Greedy: for each direction, every token is matched to its
///   max-cosine counterpart and the matches averaged; the two
///   directional means are averaged.
///
/// With `clip_negatives`, a negative pair cosine is reported as 0 so
/// corpus scores stay in 0..100; without it scores may be negative.
/// Corpus scores are pair means scaled by 100.
pub fn embedding_scores_with(
    pairs: &[EvalPair],
    table: &VectorTable,
    clip_negatives: bool,
) -> Result<EmbeddingScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyPairs);
    }
    let clip = |value: f64| if clip_negatives { value.max(0.0) } else { value };
    let mut sums = [0.0; 3];
    let mut all_oov = 0usize;
    for pair in pairs {
        let hyp = side_vectors(pair.hypothesis.as_slice(), table);
        let reference = side_vectors(pair.reference.as_slice(), table);
        if hyp.is_empty() || reference.is_empty() {
            all_oov += 1;
            continue;
        }
        let dim = table.dim();
        sums[0] += clip(cosine(&mean_vector(&hyp, dim), &mean_vector(&reference, dim)));
        sums[1] += clip(cosine(
            &extrema_vector(&hyp, dim),
            &extrema_vector(&reference, dim),
        ));
        let greedy =
            (greedy_direction(&hyp, &reference) + greedy_direction(&reference, &hyp)) / 2.0;
        sums[2] += clip(greedy);
    }
    let count = pairs.len() as f64;
    Ok(EmbeddingScores {
        average: 100.0 * sums[0] / count,
        extrema: 100.0 * sums[1] / count,
        greedy: 100.0 * sums[2] / count,
        all_oov_pairs: all_oov,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogprobRecord {
    /// Present for traceability; any JSON scalar is accepted.
    #[allow(dead_code)]
    example_id: serde_json::Value,
    #[allow(dead_code)]
    token_index: u64,
    logprob: f64,
}

/// Perplexity from a line-delimited file of per-token records
/// `{example_id, token_index, logprob}` with natural-log probabilities.
///
/// PPL is `exp(-mean logprob)` over every record. A positive log
/// probability or an empty file is an error.
pub fn ppl_from_logprobs(path: impl AsRef<Path>) -> Result<f64, MetricsError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogprobRecord =
            serde_json::from_str(&line).map_err(|e| MetricsError::MalformedLogprob {
                path: display.clone(),
                line: number,
                message: e.to_string(),
            })?;
        if record.logprob > 0.0 {
            return Err(MetricsError::PositiveLogprob {
                path: display,
                line: number,
                value: record.logprob,
            });
        }
        sum += record.logprob;
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::EmptyLogprobs);
    }
    Ok((-sum / count as f64).exp())
}

/// Metric values collected before aggregation. Every field on the
/// 0..100 scale must be present for [`report_aggregate`]; perplexity is
/// optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricValues {
    /// `bleu[k-1]` is BLEU-k.
    pub bleu: [Option<f64>; MAX_BLEU_ORDER],
    pub rouge_l: Option<f64>,
    pub dist_1: Option<f64>,
    pub dist_2: Option<f64>,
    pub embed_average: Option<f64>,
    pub embed_extrema: Option<f64>,
    pub embed_greedy: Option<f64>,
    pub ppl: Option<f64>,
}

/// Aggregated evaluation report.
///
/// Serialized field order matches the reporting convention: BLEU-1..4,
/// Rouge-L, Dist-1, Dist-2, Embed Average/Extrema/Greedy, AVE, PPL.
/// `ave` is the unweighted mean of the ten 0..100 metrics; perplexity
/// is excluded from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "bleu-1")]
    pub bleu_1: f64,
    #[serde(rename = "bleu-2")]
    pub bleu_2: f64,
    #[serde(rename = "bleu-3")]
    pub bleu_3: f64,
    #[serde(rename = "bleu-4")]
    pub bleu_4: f64,
    #[serde(rename = "rouge-l")]
    pub rouge_l: f64,
    #[serde(rename = "dist-1")]
    pub dist_1: f64,
    #[serde(rename = "dist-2")]
    pub dist_2: f64,
    #[serde(rename = "embed-average")]
    pub embed_average: f64,
    #[serde(rename = "embed-extrema")]
    pub embed_extrema: f64,
    #[serde(rename = "embed-greedy")]
    pub embed_greedy: f64,
    pub ave: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppl: Option<f64>,
    /// SHA-256 digests of the evaluated files, keyed by role.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub digests: BTreeMap<String, String>,
    /// Echo of the configuration that produced the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_echo: Option<serde_json::Value>,
}

fn require(value: Option<f64>, name: &str) -> Result<f64, MetricsError> {
    let value = value.ok_or_else(|| MetricsError::MissingMetric {
        name: name.to_string(),
    })?;
    if !(0.0..=100.0).contains(&value) {
        return Err(MetricsError::MetricOutOfRange {
            name: name.to_string(),
            value,
        });
    }
    Ok(value)
}

/// Folds collected metric values into a [`MetricReport`].
///
/// All ten 0..100 metrics must be present and in range; the error names
/// the first offender. `ave` is their unweighted arithmetic mean.
pub fn report_aggregate(values: &MetricValues) -> Result<MetricReport, MetricsError> {
    let bleu_1 = require(values.bleu[0], "bleu-1")?;
    let bleu_2 = require(values.bleu[1], "bleu-2")?;
    let bleu_3 = require(values.bleu[2], "bleu-3")?;
    let bleu_4 = require(values.bleu[3], "bleu-4")?;
    let rouge = require(values.rouge_l, "rouge-l")?;
    let dist_1 = require(values.dist_1, "dist-1")?;
    let dist_2 = require(values.dist_2, "dist-2")?;
    let embed_average = require(values.embed_average, "embed-average")?;
    let embed_extrema = require(values.embed_extrema, "embed-extrema")?;
    let embed_greedy = require(values.embed_greedy, "embed-greedy")?;
    let ave = (bleu_1
        + bleu_2
        + bleu_3
        + bleu_4
        + rouge
        + dist_1
        + dist_2
        + embed_average
        + embed_extrema
        + embed_greedy)
        / 10.0;
    Ok(MetricReport {
        bleu_1,
        bleu_2,
        bleu_3,
        bleu_4,
        rouge_l: rouge,
        dist_1,
        dist_2,
        embed_average,
        embed_extrema,
        embed_greedy,
        ave,
        ppl: values.ppl,
        digests: BTreeMap::new(),
        config_echo: None,
    })
}
