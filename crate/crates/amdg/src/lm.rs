//! Desk-scale count-based language modeling implementing the two-stage
//! schedule: train on the de-domained multi-domain mix (stage 1), then
//! adapt to the low-resource target domain (stage 2) and verify the
//! benefit via perplexity.
//!
//! The model is an interpolated absolute-discounting n-gram LM. With
//! history h of length k−1, discount d, context total c(h), and N1+(h)
//! distinct continuations:
//!
//! ```text
//! p_k(w|h) = max(c(h,w) − d, 0)/c(h) + d·N1+(h)/c(h) · p_{k−1}(w|h')
//! ```
//!
//! where h' drops the oldest history token. A context with c(h) = 0 backs
//! off entirely to p_{k−1}; the recursion bottoms out at the uniform
//! distribution 1/V over the vocabulary. Because every training count is
//! a positive integer and d < 1, the discounted mass is nonnegative and
//! each level renormalizes exactly, so next-token distributions sum to 1
//! and every probability is strictly positive.
//!
//! Stage-2 adaptation has no count-model analogue of "initialize with
//! stage-1 weights"; the standard statistical-LM equivalent is linear
//! interpolation, `p = λ·p_target + (1−λ)·p_base`, with λ chosen on a
//! validation grid. Both components first have their vocabularies
//! extended to the union so the mixture stays normalized.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{Corpus, TokenSeq, PLACEHOLDER};

/// Utterance-start padding token.
pub const BEGIN_TOKEN: &str = "<s>";
/// End-of-utterance event token.
pub const END_TOKEN: &str = "</s>";
/// Out-of-vocabulary token.
pub const UNK_TOKEN: &str = "<unk>";

/// Always-present vocabulary entries. Angle-bracketed names cannot clash
/// with corpus tokens (the tokenizer splits `<` and `>` into single-char
/// tokens); the placeholder is reserved so de-domained text never goes
/// out of vocabulary.
pub const RESERVED_TOKENS: [&str; 4] = [BEGIN_TOKEN, END_TOKEN, UNK_TOKEN, PLACEHOLDER];

const MODEL_HEADER: &str = "amdg-ngram-lm v1";
const ADAPTED_MODEL_HEADER: &str = "amdg-adapted-lm v1";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("model order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("discount must lie strictly between 0 and 1, got {0}")]
    InvalidDiscount(f64),
    #[error("perplexity is undefined on an empty corpus")]
    EmptyEvaluation,
    #[error("lambda grid must be non-empty")]
    EmptyGrid,
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("{path}: unsupported model format (expected header {expected:?})")]
    UnsupportedFormat { path: PathBuf, expected: String },
    #[error("{path}: line {line}: {message}")]
    MalformedModel {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("malformed count table: {0}")]
    BadCounts(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Maximum n-gram order (history length + 1).
    pub order: usize,
    /// Absolute discount d, strictly inside (0, 1).
    pub discount: f64,
    /// Tokens seen fewer times than this map to [`UNK_TOKEN`].
    pub min_count: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            discount: 0.75,
            min_count: 1,
        }
    }
}

impl LmConfig {
    pub fn with_order(order: usize) -> Self {
        LmConfig {
            order,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), LmError> {
        if self.order == 0 {
            return Err(LmError::InvalidOrder(self.order));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(LmError::InvalidDiscount(self.discount));
        }
        Ok(())
    }
}

/// Anything that assigns next-token probabilities over a fixed vocabulary.
pub trait LanguageModel {
    /// The event vocabulary the distributions range over.
    fn vocab(&self) -> &BTreeSet<String>;

    /// p(token | history). The history is the utterance prefix (most
    /// recent token last); tokens outside the vocabulary are treated as
    /// unknown on both sides.
    fn prob(&self, history: &[&str], token: &str) -> f64;
}

/// Interpolated absolute-discounting n-gram language model.
///
/// Count tables are kept for every order k ≤ `order`, keyed by the
/// space-joined k-gram (tokens never contain whitespace, so joining is
/// injective). Immutable after training; scoring never mutates.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    config: LmConfig,
    vocab: BTreeSet<String>,
    /// `counts[k-1]`: space-joined k-gram → occurrence count (≥ 1).
    counts: Vec<BTreeMap<String, u64>>,
    /// `contexts[k-1]`: space-joined (k−1)-history → (total, distinct
    /// continuations). The unigram context is the empty string.
    contexts: Vec<BTreeMap<String, (u64, u64)>>,
}

impl NgramLm {
    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Count of a space-joined k-gram, 0 when unseen.
    pub fn count(&self, k: usize, ngram: &str) -> u64 {
        self.counts
            .get(k - 1)
            .and_then(|m| m.get(ngram))
            .copied()
            .unwrap_or(0)
    }

    /// Build a model directly from count tables (one map per order,
    /// lowest first). Reserved tokens join the vocabulary automatically;
    /// every n-gram must have exactly k in-vocabulary tokens. An
    /// all-empty count table is valid and yields the uniform model.
    pub fn from_counts(
        config: LmConfig,
        vocab: BTreeSet<String>,
        counts: Vec<BTreeMap<String, u64>>,
    ) -> Result<Self, LmError> {
        config.validate()?;
        if counts.len() != config.order {
            return Err(LmError::BadCounts(format!(
                "expected {} count tables, got {}",
                config.order,
                counts.len()
            )));
        }
        let mut vocab = vocab;
        for t in RESERVED_TOKENS {
            vocab.insert(t.to_string());
        }
        for (i, table) in counts.iter().enumerate() {
            let k = i + 1;
            for (ngram, &count) in table {
                if count == 0 {
                    return Err(LmError::BadCounts(format!("zero count for {ngram:?}")));
                }
                let parts: Vec<&str> = ngram.split(' ').collect();
                if parts.len() != k {
                    return Err(LmError::BadCounts(format!(
                        "{ngram:?} has {} tokens, expected {k}",
                        parts.len()
                    )));
                }
                if let Some(bad) = parts.iter().find(|t| !vocab.contains(**t)) {
                    return Err(LmError::BadCounts(format!(
                        "{ngram:?} contains out-of-vocabulary token {bad:?}"
                    )));
                }
            }
        }
        let contexts = derive_contexts(&counts);
        Ok(NgramLm {
            config,
            vocab,
            counts,
            contexts,
        })
    }

    /// Grow the vocabulary (never shrinks). Counts are untouched: new
    /// words receive probability through discounted smoothing and the
    /// uniform base, which now ranges over the larger vocabulary. Used to
    /// align two models on their union vocabulary before interpolation.
    pub fn extend_vocab<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) {
        for w in words {
            if !self.vocab.contains(w) {
                self.vocab.insert(w.to_string());
            }
        }
    }

    fn map_token<'a>(&'a self, token: &'a str) -> &'a str {
        if self.vocab.contains(token) {
            token
        } else {
            UNK_TOKEN
        }
    }

    /// p_k(w | last k−1 history tokens), recursing toward uniform.
    /// `history` must already be vocabulary-mapped and padded.
    fn prob_at(&self, k: usize, history: &[&str], token: &str) -> f64 {
        if k == 0 {
            return 1.0 / self.vocab.len() as f64;
        }
        let ctx = history[history.len() - (k - 1)..].join(" ");
        let lower = self.prob_at(k - 1, history, token);
        let Some(&(total, distinct)) = self.contexts[k - 1].get(&ctx) else {
            return lower;
        };
        let ngram = if ctx.is_empty() {
            token.to_string()
        } else {
            format!("{ctx} {token}")
        };
        let count = self.counts[k - 1].get(&ngram).copied().unwrap_or(0);
        let d = self.config.discount;
        let discounted = (count as f64 - d).max(0.0) / total as f64;
        let backoff_weight = d * distinct as f64 / total as f64;
        discounted + backoff_weight * lower
    }
}

/// Sum of per-context totals and distinct-continuation counts for every
/// order, derived from the primary count tables.
fn derive_contexts(counts: &[BTreeMap<String, u64>]) -> Vec<BTreeMap<String, (u64, u64)>> {
    counts
        .iter()
        .map(|table| {
            let mut ctxs: BTreeMap<String, (u64, u64)> = BTreeMap::new();
            for (ngram, &count) in table {
                let ctx = match ngram.rsplit_once(' ') {
                    Some((head, _)) => head.to_string(),
                    None => String::new(),
                };
                let entry = ctxs.entry(ctx).or_insert((0, 0));
                entry.0 += count;
                entry.1 += 1;
            }
            ctxs
        })
        .collect()
}

impl LanguageModel for NgramLm {
    fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    fn prob(&self, history: &[&str], token: &str) -> f64 {
        let token = self.map_token(token);
        let needed = self.config.order - 1;
        let mut padded: Vec<&str> = Vec::with_capacity(needed);
        for _ in history.len()..needed {
            padded.push(BEGIN_TOKEN);
        }
        let start = history.len().saturating_sub(needed);
        padded.extend(history[start..].iter().map(|t| self.map_token(t)));
        self.prob_at(self.config.order, &padded, token)
    }
}

/// Train an n-gram model on every utterance of `corpus` (context turns
/// and responses alike). Each utterance contributes its tokens plus one
/// end-of-utterance event, with begin-token padding for short histories;
/// counts for every order k ≤ `config.order` are accumulated. Tokens
/// seen fewer than `min_count` times train as [`UNK_TOKEN`].
pub fn train_lm(corpus: &Corpus, config: LmConfig) -> Result<NgramLm, LmError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }

    // pass 1: raw unigram counts decide the vocabulary
    let mut raw: BTreeMap<&str, u64> = BTreeMap::new();
    let utterances: Vec<Vec<String>> = corpus
        .examples
        .iter()
        .flat_map(|e| e.utterances())
        .map(|u| u.tokens().0)
        .collect();
    for tokens in &utterances {
        for t in tokens {
            *raw.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: BTreeSet<String> = raw
        .iter()
        .filter(|(_, &c)| c >= config.min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    for t in RESERVED_TOKENS {
        vocab.insert(t.to_string());
    }

    // pass 2: padded event streams at every order
    let mut counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); config.order];
    for tokens in &utterances {
        let mut stream: Vec<&str> = Vec::with_capacity(tokens.len() + config.order);
        stream.resize(config.order - 1, BEGIN_TOKEN);
        stream.extend(tokens.iter().map(|t| {
            if vocab.contains(t.as_str()) {
                t.as_str()
            } else {
                UNK_TOKEN
            }
        }));
        stream.push(END_TOKEN);
        for event in config.order - 1..stream.len() {
            for k in 1..=config.order {
                let ngram = stream[event + 1 - k..=event].join(" ");
                *counts[k - 1].entry(ngram).or_insert(0) += 1;
            }
        }
    }

    let contexts = derive_contexts(&counts);
    Ok(NgramLm {
        config,
        vocab,
        counts,
        contexts,
    })
}

/// Next-token probability under any model, with the history given as a
/// token sequence.
pub fn next_token_prob(lm: &impl LanguageModel, history: &TokenSeq, token: &str) -> f64 {
    let history: Vec<&str> = history.iter().map(String::as_str).collect();
    lm.prob(&history, token)
}

/// Perplexity of `lm` on every utterance of `corpus`:
/// `exp(−(1/N)·Σ ln p(token|history))` over all utterance tokens plus one
/// end-of-utterance event each, N being the total number of predicted
/// events. History never crosses utterance boundaries.
pub fn perplexity(lm: &impl LanguageModel, corpus: &Corpus) -> Result<f64, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyEvaluation);
    }
    let mut log_sum = 0.0f64;
    let mut events = 0usize;
    for example in &corpus.examples {
        for u in example.utterances() {
            let tokens = u.tokens().0;
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            for i in 0..=refs.len() {
                let token = refs.get(i).copied().unwrap_or(END_TOKEN);
                log_sum += lm.prob(&refs[..i], token).ln();
                events += 1;
            }
        }
    }
    Ok((-log_sum / events as f64).exp())
}

/// Stage-1 model blended with stage-2 target counts:
/// `p = λ·p_target + (1−λ)·p_base` over the shared (union) vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedLm {
    base: NgramLm,
    target: NgramLm,
    lambda: f64,
}

impl AdaptedLm {
    /// Combine two models. Both vocabularies are extended to the union,
    /// so each component (and hence the mixture) normalizes over the same
    /// event space.
    pub fn new(mut base: NgramLm, mut target: NgramLm, lambda: f64) -> Result<Self, LmError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(LmError::LambdaOutOfRange(lambda));
        }
        let union: Vec<String> = base.vocab.union(&target.vocab).cloned().collect();
        base.extend_vocab(union.iter().map(String::as_str));
        target.extend_vocab(union.iter().map(String::as_str));
        Ok(AdaptedLm {
            base,
            target,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base(&self) -> &NgramLm {
        &self.base
    }

    pub fn target(&self) -> &NgramLm {
        &self.target
    }
}

impl LanguageModel for AdaptedLm {
    fn vocab(&self) -> &BTreeSet<String> {
        &self.base.vocab
    }

    fn prob(&self, history: &[&str], token: &str) -> f64 {
        self.lambda * self.target.prob(history, token)
            + (1.0 - self.lambda) * self.base.prob(history, token)
    }
}

/// Run stage 2: train target-domain counts on `target_train` (with the
/// base model's configuration), then pick the interpolation weight from
/// `lambda_grid` that minimizes perplexity on `target_valid`. Ties break
/// toward the larger λ, favoring the target domain.
pub fn adapt_lm(
    base: &NgramLm,
    target_train: &Corpus,
    target_valid: &Corpus,
    lambda_grid: &[f64],
) -> Result<AdaptedLm, LmError> {
    if lambda_grid.is_empty() {
        return Err(LmError::EmptyGrid);
    }
    if target_valid.is_empty() {
        return Err(LmError::EmptyEvaluation);
    }
    let target = train_lm(target_train, base.config)?;
    let mut best: Option<(f64, f64)> = None; // (ppl, lambda)
    for &lambda in lambda_grid {
        let candidate = AdaptedLm::new(base.clone(), target.clone(), lambda)?;
        let ppl = perplexity(&candidate, target_valid)?;
        let better = match best {
            None => true,
            Some((best_ppl, best_lambda)) => {
                ppl < best_ppl || (ppl == best_ppl && lambda > best_lambda)
            }
        };
        if better {
            best = Some((ppl, lambda));
        }
    }
    let (_, lambda) = best.expect("grid is non-empty");
    AdaptedLm::new(base.clone(), target, lambda)
}

fn write_model_body<W: Write>(w: &mut W, lm: &NgramLm) -> std::io::Result<()> {
    let meta = serde_json::json!({
        "order": lm.config.order,
        "discount": lm.config.discount,
        "min_count": lm.config.min_count,
    });
    writeln!(w, "{meta}")?;
    for token in &lm.vocab {
        writeln!(w, "V {token}")?;
    }
    for (i, table) in lm.counts.iter().enumerate() {
        for (ngram, count) in table {
            writeln!(w, "C {} {} {}", i + 1, count, ngram)?;
        }
    }
    Ok(())
}

/// Incremental parser for the model body grammar: a JSON config line,
/// then `V <token>` and `C <k> <count> <ngram>` lines in any order.
struct BodyParser<'p> {
    path: &'p Path,
    config: Option<LmConfig>,
    vocab: BTreeSet<String>,
    counts: Vec<BTreeMap<String, u64>>,
}

impl<'p> BodyParser<'p> {
    fn new(path: &'p Path) -> Self {
        BodyParser {
            path,
            config: None,
            vocab: BTreeSet::new(),
            counts: Vec::new(),
        }
    }

    fn malformed(&self, line: usize, message: String) -> LmError {
        LmError::MalformedModel {
            path: self.path.to_path_buf(),
            line,
            message,
        }
    }

    fn feed(&mut self, lineno: usize, line: &str) -> Result<(), LmError> {
        if line.is_empty() {
            return Ok(());
        }
        let Some(config) = self.config else {
            #[derive(Deserialize)]
            struct Meta {
                order: usize,
                discount: f64,
                min_count: u64,
            }
            let meta: Meta = serde_json::from_str(line)
                .map_err(|e| self.malformed(lineno, e.to_string()))?;
            self.config = Some(LmConfig {
                order: meta.order,
                discount: meta.discount,
                min_count: meta.min_count,
            });
            self.counts = vec![BTreeMap::new(); meta.order.max(1)];
            return Ok(());
        };
        if let Some(token) = line.strip_prefix("V ") {
            if token.is_empty() || token.contains(' ') {
                return Err(self.malformed(lineno, format!("bad vocab token {token:?}")));
            }
            self.vocab.insert(token.to_string());
        } else if let Some(rest) = line.strip_prefix("C ") {
            let mut parts = rest.splitn(3, ' ');
            let entry = (|| {
                let k: usize = parts.next()?.parse().ok()?;
                let count: u64 = parts.next()?.parse().ok()?;
                let ngram = parts.next()?;
                Some((k, count, ngram))
            })();
            let (k, count, ngram) = entry
                .ok_or_else(|| self.malformed(lineno, "expected C <k> <count> <ngram>".into()))?;
            if k == 0 || k > config.order {
                return Err(
                    self.malformed(lineno, format!("order {k} outside 1..={}", config.order))
                );
            }
            if self.counts[k - 1].insert(ngram.to_string(), count).is_some() {
                return Err(self.malformed(lineno, format!("duplicate {k}-gram {ngram:?}")));
            }
        } else {
            return Err(self.malformed(lineno, format!("unrecognized line {line:?}")));
        }
        Ok(())
    }

    fn finish(self, end_line: usize) -> Result<NgramLm, LmError> {
        let config = self
            .config
            .ok_or_else(|| self.malformed(end_line, "missing config line".into()))?;
        NgramLm::from_counts(config, self.vocab, self.counts)
    }
}

/// Write a model as a line-based text dump: version header, JSON config
/// line, sorted `V <token>` vocabulary lines, then sorted
/// `C <k> <count> <token>...` count lines. Deterministic.
pub fn save_lm(lm: &NgramLm, path: &Path) -> Result<(), LmError> {
    let io_err = |source| LmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{MODEL_HEADER}").map_err(io_err)?;
    write_model_body(&mut w, lm).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Load a model written by [`save_lm`].
pub fn load_lm(path: &Path) -> Result<NgramLm, LmError> {
    let io_err = |source| LmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(io_err)?,
        None => String::new(),
    };
    if header != MODEL_HEADER {
        return Err(LmError::UnsupportedFormat {
            path: path.to_path_buf(),
            expected: MODEL_HEADER.to_string(),
        });
    }

    let mut parser = BodyParser::new(path);
    let mut last_line = 1;
    for (idx, line) in lines {
        last_line = idx + 1;
        let line = line.map_err(io_err)?;
        parser.feed(last_line, &line)?;
    }
    parser.finish(last_line + 1)
}

/// Write an adapted mixture as a text dump: version header, a JSON line
/// carrying λ, then the base and target model bodies introduced by
/// `[base]` and `[target]` section markers. Deterministic.
pub fn save_adapted_lm(adapted: &AdaptedLm, path: &Path) -> Result<(), LmError> {
    let io_err = |source| LmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{ADAPTED_MODEL_HEADER}").map_err(io_err)?;
    writeln!(w, "{}", serde_json::json!({ "lambda": adapted.lambda })).map_err(io_err)?;
    writeln!(w, "[base]").map_err(io_err)?;
    write_model_body(&mut w, &adapted.base).map_err(io_err)?;
    writeln!(w, "[target]").map_err(io_err)?;
    write_model_body(&mut w, &adapted.target).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Load a mixture written by [`save_adapted_lm`].
pub fn load_adapted_lm(path: &Path) -> Result<AdaptedLm, LmError> {
    let io_err = |source| LmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let malformed = |line: usize, message: String| LmError::MalformedModel {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(io_err)?,
        None => String::new(),
    };
    if header != ADAPTED_MODEL_HEADER {
        return Err(LmError::UnsupportedFormat {
            path: path.to_path_buf(),
            expected: ADAPTED_MODEL_HEADER.to_string(),
        });
    }

    #[derive(Deserialize)]
    struct Meta {
        lambda: f64,
    }
    let meta_line = lines
        .next()
        .ok_or_else(|| malformed(2, "missing lambda line".into()))?
        .1
        .map_err(io_err)?;
    let meta: Meta = serde_json::from_str(&meta_line).map_err(|e| malformed(2, e.to_string()))?;

    let mut base: Option<BodyParser> = None;
    let mut target: Option<BodyParser> = None;
    let mut base_end = 3;
    let mut last_line = 2;
    for (idx, line) in lines {
        last_line = idx + 1;
        let line = line.map_err(io_err)?;
        match line.as_str() {
            "[base]" if base.is_none() => base = Some(BodyParser::new(path)),
            "[target]" if base.is_some() && target.is_none() => {
                base_end = last_line;
                target = Some(BodyParser::new(path));
            }
            _ => match (&mut base, &mut target) {
                (_, Some(parser)) => parser.feed(last_line, &line)?,
                (Some(parser), None) => parser.feed(last_line, &line)?,
                (None, None) => {
                    return Err(malformed(last_line, "expected [base] section".into()))
                }
            },
        }
    }
    let base = base
        .ok_or_else(|| malformed(last_line + 1, "missing [base] section".into()))?
        .finish(base_end)?;
    let target = target
        .ok_or_else(|| malformed(last_line + 1, "missing [target] section".into()))?
        .finish(last_line + 1)?;
    AdaptedLm::new(base, target, meta.lambda)
}

/// A model loaded from disk: a plain n-gram model or an adapted mixture,
/// dispatched on the file's header line.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedLm {
    Plain(NgramLm),
    Adapted(AdaptedLm),
}

impl LanguageModel for LoadedLm {
    fn vocab(&self) -> &BTreeSet<String> {
        match self {
            LoadedLm::Plain(lm) => lm.vocab(),
            LoadedLm::Adapted(lm) => lm.vocab(),
        }
    }

    fn prob(&self, history: &[&str], token: &str) -> f64 {
        match self {
            LoadedLm::Plain(lm) => lm.prob(history, token),
            LoadedLm::Adapted(lm) => lm.prob(history, token),
        }
    }
}

/// Load either model format, dispatching on the header line.
pub fn load_any_lm(path: &Path) -> Result<LoadedLm, LmError> {
    let io_err = |source| LmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(io_err)?;
    if first.trim_end() == ADAPTED_MODEL_HEADER {
        Ok(LoadedLm::Adapted(load_adapted_lm(path)?))
    } else {
        Ok(LoadedLm::Plain(load_lm(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueExample, Split, Utterance};
    use crate::rng::SplitMix64;

    /// Corpus whose examples each hold one context turn and one response.
    fn corpus_of(domain: &str, rows: &[(&str, &str)]) -> Corpus {
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
        Corpus::new(domain, Split::Train, examples).unwrap()
    }

    /// A single-utterance training corpus: context carries the text, the
    /// response is a dot so it contributes 2 fixed events per example.
    fn text_corpus(texts: &[&str]) -> Corpus {
        corpus_of("d", &texts.iter().map(|t| (*t, ".")).collect::<Vec<_>>())
    }

    /// A model trained on exactly one utterance "a b a b" (order 2,
    /// d = 0.75). All constants below were frozen from an independent
    /// spreadsheet-style computation of the discounting recursion.
    fn toy_model() -> NgramLm {
        // a lone context turn plus a response would add events; build the
        // corpus from raw counts instead so the stream is exactly
        // a|<s>, b|a, a|b, b|a, </s>|b
        let mut uni = BTreeMap::new();
        uni.insert("a".to_string(), 2u64);
        uni.insert("b".to_string(), 2);
        uni.insert(END_TOKEN.to_string(), 1);
        let mut bi = BTreeMap::new();
        bi.insert(format!("{BEGIN_TOKEN} a"), 1u64);
        bi.insert("a b".to_string(), 2);
        bi.insert("b a".to_string(), 1);
        bi.insert(format!("b {END_TOKEN}"), 1);
        NgramLm::from_counts(
            LmConfig::with_order(2),
            ["a".to_string(), "b".to_string()].into_iter().collect(),
            vec![uni, bi],
        )
        .unwrap()
    }

    #[test]
    fn training_reproduces_hand_counts() {
        // the same event stream via train_lm on one single-utterance
        // corpus: context "a b a b", response "." adds .|<s> and </s>|.
        let corpus = corpus_of("d", &[("a b a b", ".")]);
        let lm = train_lm(&corpus, LmConfig::with_order(2)).unwrap();
        assert_eq!(lm.count(1, "a"), 2);
        assert_eq!(lm.count(1, "b"), 2);
        assert_eq!(lm.count(1, END_TOKEN), 2); // one per utterance
        assert_eq!(lm.count(2, "a b"), 2);
        assert_eq!(lm.count(2, &format!("{BEGIN_TOKEN} a")), 1);
        assert_eq!(lm.count(2, &format!("b {END_TOKEN}")), 1);
        assert_eq!(lm.count(2, "b a"), 1);
    }

    #[test]
    fn hand_frozen_probabilities() {
        let lm = toy_model();
        // V = {a, b} + 4 reserved = 6
        assert_eq!(lm.vocab().len(), 6);
        let p = |h: &[&str], w: &str| lm.prob(h, w);
        assert!((p(&[], "a") - 0.49375).abs() < 1e-12); // empty history pads to <s>
        assert!((p(&["a"], "b") - 0.746875).abs() < 1e-12);
        assert!((p(&["b"], "a") - 0.36875).abs() < 1e-12);
        assert!((p(&["b"], END_TOKEN) - 0.21875).abs() < 1e-12);
        // unigram level via an unseen context (full backoff)
        assert!((p(&["zzz"], "a") - 0.325).abs() < 1e-12);
        assert!((p(&["zzz"], END_TOKEN) - 0.125).abs() < 1e-12);
        assert!((p(&["zzz"], PLACEHOLDER) - 0.075).abs() < 1e-12);
    }

    #[test]
    fn hand_frozen_perplexity() {
        let lm = toy_model();
        let eval = corpus_of("d", &[("a b", "a b")]); // two identical utterances
        let ppl = perplexity(&lm, &eval).unwrap();
        assert!((ppl - 2.314367395220226).abs() < 1e-9);
    }

    #[test]
    fn distributions_sum_to_one() {
        let corpus = text_corpus(&[
            "you know the movie",
            "the movie is long",
            "知道 电影 阿凡达",
            "a b a b a",
        ]);
        let lm = train_lm(&corpus, LmConfig::default()).unwrap();
        let vocab: Vec<String> = lm.vocab().iter().cloned().collect();
        let mut rng = SplitMix64::new(5);
        for _ in 0..100 {
            let len = rng.next_below(3) as usize;
            let history: Vec<&str> = (0..len)
                .map(|_| vocab[rng.next_below(vocab.len() as u64) as usize].as_str())
                .collect();
            let sum: f64 = vocab.iter().map(|w| lm.prob(&history, w)).sum();
            assert!((sum - 1.0).abs() < 1e-6, "history {history:?}: sum {sum}");
            for w in &vocab {
                assert!(lm.prob(&history, w) > 0.0);
            }
        }
    }

    #[test]
    fn uniform_model_from_empty_counts() {
        let lm = NgramLm::from_counts(
            LmConfig::with_order(2),
            ["a".to_string(), "b".to_string()].into_iter().collect(),
            vec![BTreeMap::new(), BTreeMap::new()],
        )
        .unwrap();
        let v = lm.vocab().len() as f64;
        for w in ["a", "b", UNK_TOKEN, END_TOKEN] {
            assert!((lm.prob(&[], w) - 1.0 / v).abs() < 1e-12);
        }
        // PPL of a uniform model is exactly V on any text
        let eval = text_corpus(&["a b a", "b b"]);
        let ppl = perplexity(&lm, &eval).unwrap();
        assert!((ppl - v).abs() < 1e-9);
    }

    #[test]
    fn smoothing_limit_recovers_mle() {
        // every utterance (context and response alike) is the single
        // token "a": with a vanishing discount the model's transitions
        // become certain and PPL → 1
        let corpus = corpus_of("d", &[("a", "a"), ("a", "a")]);
        let config = LmConfig {
            order: 2,
            discount: 1e-9,
            min_count: 1,
        };
        let lm = train_lm(&corpus, config).unwrap();
        assert!(lm.prob(&[], "a") > 0.999);
        assert!(lm.prob(&["a"], END_TOKEN) > 0.999);
        let ppl = perplexity(&lm, &corpus).unwrap();
        assert!(ppl < 1.001, "ppl {ppl}");
        assert!(ppl >= 1.0);
    }

    #[test]
    fn alternating_corpus_mle_check() {
        let text = ["a b "; 25].concat();
        let corpus = text_corpus(&[text.trim()]);
        let lm = train_lm(
            &corpus,
            LmConfig {
                order: 2,
                discount: 0.75,
                min_count: 1,
            },
        )
        .unwrap();
        // closed form: p(b|a) = (c(ab)−d)/c(a·) + d·N1+(a)/c(a·)·p1(b)
        let c_ab = lm.count(2, "a b") as f64;
        let p1_b = lm.prob(&["nonexistent-context-token"], "b");
        let want = (c_ab - 0.75) / c_ab + 0.75 * 1.0 / c_ab * p1_b;
        assert!((lm.prob(&["a"], "b") - want).abs() < 1e-12);
        assert!(lm.prob(&["a"], "b") > 0.97);
        assert!(lm.prob(&["b"], "a") > 0.93);
    }

    #[test]
    fn min_count_maps_rare_tokens_to_unk() {
        let corpus = corpus_of("d", &[("common common common rare", "common common")]);
        let lm = train_lm(
            &corpus,
            LmConfig {
                order: 1,
                discount: 0.75,
                min_count: 2,
            },
        )
        .unwrap();
        assert!(!lm.vocab().contains("rare"));
        assert_eq!(lm.count(1, UNK_TOKEN), 1);
        assert_eq!(lm.count(1, "common"), 5);
        // unseen words score exactly like the unknown token
        assert_eq!(lm.prob(&[], "rare"), lm.prob(&[], UNK_TOKEN));
    }

    #[test]
    fn empty_corpus_and_bad_config_rejected() {
        let empty = Corpus::new("d", Split::Train, vec![]).unwrap();
        assert!(matches!(
            train_lm(&empty, LmConfig::default()),
            Err(LmError::EmptyCorpus)
        ));
        let corpus = text_corpus(&["a"]);
        assert!(matches!(
            train_lm(&corpus, LmConfig::with_order(0)),
            Err(LmError::InvalidOrder(0))
        ));
        for d in [0.0, 1.0, -0.5] {
            let config = LmConfig {
                order: 2,
                discount: d,
                min_count: 1,
            };
            assert!(matches!(
                train_lm(&corpus, config),
                Err(LmError::InvalidDiscount(_))
            ));
        }
        let lm = train_lm(&corpus, LmConfig::default()).unwrap();
        assert!(matches!(
            perplexity(&lm, &empty),
            Err(LmError::EmptyEvaluation)
        ));
    }

    #[test]
    fn next_token_prob_accepts_token_seq() {
        let lm = toy_model();
        let history = TokenSeq::from(vec!["a"]);
        assert_eq!(next_token_prob(&lm, &history, "b"), lm.prob(&["a"], "b"));
    }

    #[test]
    fn adapted_endpoints_match_components() {
        let base = train_lm(&text_corpus(&["a b a b", "b a"]), LmConfig::default()).unwrap();
        let target = train_lm(&text_corpus(&["a b b", "b b a"]), LmConfig::default()).unwrap();
        let at0 = AdaptedLm::new(base.clone(), target.clone(), 0.0).unwrap();
        let at1 = AdaptedLm::new(base.clone(), target.clone(), 1.0).unwrap();
        for (h, w) in [(vec![], "a"), (vec!["a"], "b"), (vec!["a", "b"], "b")] {
            assert_eq!(at0.prob(&h, w), base.prob(&h, w));
            assert_eq!(at1.prob(&h, w), target.prob(&h, w));
        }
    }

    #[test]
    fn adapted_mixture_normalizes_over_union_vocab() {
        let base = train_lm(&text_corpus(&["x y x"]), LmConfig::default()).unwrap();
        let target = train_lm(&text_corpus(&["p q p q"]), LmConfig::default()).unwrap();
        let adapted = AdaptedLm::new(base, target, 0.4).unwrap();
        let vocab: Vec<String> = adapted.vocab().iter().cloned().collect();
        assert!(vocab.contains(&"x".to_string()) && vocab.contains(&"p".to_string()));
        for history in [vec![], vec!["x"], vec!["p", "q"], vec!["zzz"]] {
            let sum: f64 = vocab.iter().map(|w| adapted.prob(&history, w)).sum();
            assert!((sum - 1.0).abs() < 1e-6, "history {history:?}: {sum}");
        }
    }

    #[test]
    fn lambda_out_of_range_rejected() {
        let lm = toy_model();
        assert!(matches!(
            AdaptedLm::new(lm.clone(), lm, 1.5),
            Err(LmError::LambdaOutOfRange(_))
        ));
    }

    #[test]
    fn adapt_selects_grid_optimum() {
        let base = train_lm(
            &text_corpus(&["the $P is good", "i like the $P", "the $P again"]),
            LmConfig::default(),
        )
        .unwrap();
        let target_train = text_corpus(&["the film is good", "i like the film"]);
        let target_valid = text_corpus(&["the film is good"]);
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let adapted = adapt_lm(&base, &target_train, &target_valid, &grid).unwrap();
        // exhaustive re-evaluation: no grid value beats the chosen one
        let chosen_ppl = perplexity(&adapted, &target_valid).unwrap();
        for &lambda in &grid {
            let candidate = AdaptedLm::new(
                adapted.base().clone(),
                adapted.target().clone(),
                lambda,
            )
            .unwrap();
            let ppl = perplexity(&candidate, &target_valid).unwrap();
            assert!(
                chosen_ppl <= ppl + 1e-12,
                "λ={lambda} beats chosen λ={}",
                adapted.lambda()
            );
        }
    }

    #[test]
    fn adapt_ties_break_toward_larger_lambda() {
        // identical base and target data: every λ gives the same mixture,
        // so the tie-break must pick the largest grid value
        let data = text_corpus(&["a b c", "c b a"]);
        let base = train_lm(&data, LmConfig::default()).unwrap();
        let valid = text_corpus(&["a b"]);
        let adapted = adapt_lm(&base, &data, &valid, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(adapted.lambda(), 1.0);
    }

    #[test]
    fn adapt_rejects_empty_inputs() {
        let lm = toy_model();
        let corpus = text_corpus(&["a b"]);
        let empty = Corpus::new("d", Split::Train, vec![]).unwrap();
        assert!(matches!(
            adapt_lm(&lm, &corpus, &corpus, &[]),
            Err(LmError::EmptyGrid)
        ));
        assert!(matches!(
            adapt_lm(&lm, &corpus, &empty, &[0.5]),
            Err(LmError::EmptyEvaluation)
        ));
    }

    #[test]
    fn grid_endpoint_selection() {
        // target_valid drawn from target distribution: λ=1 should win a
        // {0,1} grid; with valid drawn from base distribution λ=0 wins
        let base_data = text_corpus(&["x y x y x", "y x y"]);
        let target_data = text_corpus(&["p q p q", "q p"]);
        let base = train_lm(&base_data, LmConfig::default()).unwrap();
        let toward_target =
            adapt_lm(&base, &target_data, &text_corpus(&["p q p"]), &[0.0, 1.0]).unwrap();
        assert_eq!(toward_target.lambda(), 1.0);
        let toward_base =
            adapt_lm(&base, &target_data, &text_corpus(&["x y x"]), &[0.0, 1.0]).unwrap();
        assert_eq!(toward_base.lambda(), 0.0);
    }

    #[test]
    fn model_file_round_trip() {
        let corpus = text_corpus(&["a b a b", "知道 电影 $P"]);
        let lm = train_lm(&corpus, LmConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lm");
        save_lm(&lm, &path).unwrap();
        let loaded = load_lm(&path).unwrap();
        assert_eq!(loaded, lm);
        // spot-check scoring identity
        assert_eq!(loaded.prob(&["a"], "b"), lm.prob(&["a"], "b"));
    }

    #[test]
    fn model_save_is_deterministic() {
        let corpus = text_corpus(&["a b c d"]);
        let lm = train_lm(&corpus, LmConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("1.lm");
        let p2 = dir.path().join("2.lm");
        save_lm(&lm, &p1).unwrap();
        save_lm(&lm, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn model_load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lm");
        std::fs::write(&path, "who knows\n").unwrap();
        assert!(matches!(
            load_lm(&path),
            Err(LmError::UnsupportedFormat { .. })
        ));
        std::fs::write(
            &path,
            format!("{MODEL_HEADER}\n{{\"order\":2,\"discount\":0.75,\"min_count\":1}}\nX weird\n"),
        )
        .unwrap();
        assert!(matches!(
            load_lm(&path),
            Err(LmError::MalformedModel { line: 3, .. })
        ));
    }

    #[test]
    fn ppl_at_least_one() {
        let corpus = text_corpus(&["a b c", "c a"]);
        let lm = train_lm(&corpus, LmConfig::default()).unwrap();
        for eval in [text_corpus(&["a b c"]), text_corpus(&["unseen words here"])] {
            assert!(perplexity(&lm, &eval).unwrap() >= 1.0);
        }
    }

    #[test]
    fn adapted_model_file_round_trip() {
        let base = train_lm(&text_corpus(&["x y x y", "y z"]), LmConfig::default()).unwrap();
        let adapted = adapt_lm(
            &base,
            &text_corpus(&["x q x"]),
            &text_corpus(&["x q"]),
            &[0.25, 0.5, 0.75],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapted.lm");
        save_adapted_lm(&adapted, &path).unwrap();
        let loaded = load_adapted_lm(&path).unwrap();
        assert_eq!(loaded, adapted);
        let eval = text_corpus(&["x y q"]);
        assert_eq!(
            perplexity(&loaded, &eval).unwrap(),
            perplexity(&adapted, &eval).unwrap()
        );
    }

    #[test]
    fn adapted_model_save_is_deterministic() {
        let base = train_lm(&text_corpus(&["x y"]), LmConfig::default()).unwrap();
        let adapted = adapt_lm(&base, &text_corpus(&["x z"]), &text_corpus(&["z"]), &[0.5])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("1.lm");
        let p2 = dir.path().join("2.lm");
        save_adapted_lm(&adapted, &p1).unwrap();
        save_adapted_lm(&adapted, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn load_any_dispatches_on_header() {
        let dir = tempfile::tempdir().unwrap();
        let plain_path = dir.path().join("plain.lm");
        let adapted_path = dir.path().join("adapted.lm");
        let base = train_lm(&text_corpus(&["x y"]), LmConfig::default()).unwrap();
        save_lm(&base, &plain_path).unwrap();
        let adapted = adapt_lm(&base, &text_corpus(&["x z"]), &text_corpus(&["z"]), &[0.5])
            .unwrap();
        save_adapted_lm(&adapted, &adapted_path).unwrap();
        assert!(matches!(
            load_any_lm(&plain_path).unwrap(),
            LoadedLm::Plain(_)
        ));
        assert!(matches!(
            load_any_lm(&adapted_path).unwrap(),
            LoadedLm::Adapted(_)
        ));
    }

    #[test]
    fn adapted_model_load_rejects_missing_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lm");
        std::fs::write(&path, format!("{ADAPTED_MODEL_HEADER}\n{{\"lambda\":0.5}}\n")).unwrap();
        assert!(matches!(
            load_adapted_lm(&path),
            Err(LmError::MalformedModel { .. })
        ));
    }
}
