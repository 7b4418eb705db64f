//! Canonical corpus representation: utterances, dialogue examples, corpora,
//! plus the text normalization and tokenization rules every other module
//! builds on.
//!
//! Corpora live on disk as UTF-8 line-delimited JSON. Each line is one
//! record:
//!
//! ```json
//! {"context": ["你 知道 阿凡达 吗", "知道 呀"], "response": "我 很 喜欢", "domain": "film", "split": "train"}
//! ```
//!
//! `context` (array of strings) and `response` (string) are required;
//! `speakers` (array of strings, parallel to `context`), `domain`, and
//! `split` are optional. `domain` carries per-example provenance so mixed
//! corpora stay auditable; `split` defaults to `train` when absent.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// The literal placeholder token substituted for matched domain phrases.
///
/// Normalization and tokenization both treat it as an atomic symbol: it is
/// never case-folded and never split.
pub const PLACEHOLDER: &str = "$P";

/// Default cap on dialogue context length, in turns.
pub const DEFAULT_MAX_CONTEXT_TURNS: usize = 10;
/// Default cap on utterance length, in tokens.
pub const DEFAULT_MAX_UTTERANCE_TOKENS: usize = 50;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("utterance is empty after normalization")]
    EmptyUtterance,
    #[error("corpus domain label must be non-empty")]
    EmptyDomain,
    #[error("{path}: line {line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: line {line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: records disagree on split ({a} vs {b} at line {line})")]
    InconsistentSplit {
        path: PathBuf,
        line: usize,
        a: String,
        b: String,
    },
    #[error("unknown split label {0:?} (expected train, valid, or test)")]
    UnknownSplit(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Normalize raw text into the canonical form used everywhere downstream.
///
/// Applies, in order: Unicode NFC composition, case folding, NFC again
/// (folding can decompose), and whitespace canonicalization (trim plus
/// collapsing internal runs to single ASCII spaces). The placeholder
/// [`PLACEHOLDER`] is preserved verbatim so de-domained text survives
/// normalization unchanged. CJK characters have no case and pass through.
///
/// Total function: any input (including the empty string) yields a result.
///
/// ```
/// use amdg::corpus::normalize_text;
/// assert_eq!(normalize_text("  Do  you "), "do you");
/// assert_eq!(normalize_text("know the $P?"), "know the $P?");
/// assert_eq!(normalize_text("Cafe\u{0301}"), "caf\u{e9}");
/// ```
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mut folded = String::with_capacity(composed.len());
    let mut chars = composed.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '$' && chars.peek() == Some(&'P') {
            chars.next();
            folded.push_str(PLACEHOLDER);
        } else {
            folded.extend(c.to_lowercase());
        }
    }
    let recomposed: String = folded.nfc().collect();
    let mut out = String::with_capacity(recomposed.len());
    let mut pending_space = false;
    for c in recomposed.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// True for characters tokenized one-per-token: CJK ideographs, kana, and
/// hangul syllables.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF      // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xF900..=0xFAFF    // CJK compatibility ideographs
        | 0x20000..=0x2FA1F  // CJK extensions B..F
        | 0x3040..=0x309F    // hiragana
        | 0x30A0..=0x30FF    // katakana
        | 0xAC00..=0xD7AF    // hangul syllables
    )
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

/// A tokenized utterance: the unit n-gram statistics and metrics operate on.
///
/// Tokens are never empty and never contain whitespace, so joining with
/// single spaces is unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(" "))
    }
}

impl From<Vec<String>> for TokenSeq {
    fn from(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }
}

impl From<Vec<&str>> for TokenSeq {
    fn from(tokens: Vec<&str>) -> Self {
        TokenSeq(tokens.into_iter().map(|t| t.to_string()).collect())
    }
}

/// Byte-offset spans of each token in the input, in order. Internal helper
/// shared by [`tokenize`] and utterance truncation.
fn token_byte_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        if c == '$' {
            if let Some(&(_, 'P')) = iter.peek() {
                let (p_start, _) = iter.next().unwrap();
                spans.push((start, p_start + 'P'.len_utf8()));
                continue;
            }
        }
        if is_cjk(c) {
            spans.push((start, start + c.len_utf8()));
            continue;
        }
        if is_word_char(c) {
            let mut end = start + c.len_utf8();
            while let Some(&(i, next)) = iter.peek() {
                // Keep combining marks attached so un-precomposed accents
                // do not split a word run.
                if (is_word_char(next) && !is_cjk(next)) || is_combining_mark(next) {
                    end = i + next.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            spans.push((start, end));
            continue;
        }
        // Punctuation and symbols: one character, one token.
        spans.push((start, start + c.len_utf8()));
    }
    spans
}

/// Split normalized text into tokens.
///
/// Rules: each CJK character is one token, each maximal run of non-CJK
/// letters and digits is one token, the placeholder `$P` is one token,
/// every other non-space character is a single token, and whitespace
/// separates tokens without producing any.
///
/// ```
/// use amdg::corpus::{tokenize, TokenSeq};
/// assert_eq!(tokenize("你好world"), TokenSeq::from(vec!["你", "好", "world"]));
/// assert_eq!(tokenize("do you know $P"), TokenSeq::from(vec!["do", "you", "know", "$P"]));
/// ```
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(
        token_byte_spans(text)
            .into_iter()
            .map(|(s, e)| text[s..e].to_string())
            .collect(),
    )
}

/// Cut `text` after at most `max_tokens` tokens, at a token boundary.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let spans = token_byte_spans(text);
    if spans.len() <= max_tokens {
        return text.to_string();
    }
    if max_tokens == 0 {
        return String::new();
    }
    let (_, end) = spans[max_tokens - 1];
    text[..end].trim_end().to_string()
}

/// One turn of dialogue. Text is normalized at construction and guaranteed
/// non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    text: String,
    speaker: Option<String>,
}

impl Utterance {
    pub fn new(raw: &str) -> Result<Self, CorpusError> {
        let text = normalize_text(raw);
        if text.is_empty() {
            return Err(CorpusError::EmptyUtterance);
        }
        Ok(Utterance {
            text,
            speaker: None,
        })
    }

    pub fn with_speaker(raw: &str, speaker: &str) -> Result<Self, CorpusError> {
        let mut u = Self::new(raw)?;
        if !speaker.is_empty() {
            u.speaker = Some(speaker.to_string());
        }
        Ok(u)
    }

    /// Construct directly from already-normalized non-empty text.
    /// Used by de-domaining, which rewrites normalized text in place.
    pub(crate) fn from_normalized(text: String, speaker: Option<String>) -> Self {
        debug_assert!(!text.is_empty());
        Utterance { text, speaker }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn speaker(&self) -> Option<&str> {
        self.speaker.as_deref()
    }

    pub fn tokens(&self) -> TokenSeq {
        tokenize(&self.text)
    }
}

/// Length caps applied when assembling a [`DialogueExample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Keep at most this many context turns (the most recent ones).
    pub max_context_turns: usize,
    /// Cut each utterance after this many tokens.
    pub max_utterance_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_context_turns: DEFAULT_MAX_CONTEXT_TURNS,
            max_utterance_tokens: DEFAULT_MAX_UTTERANCE_TOKENS,
        }
    }
}

/// One (context, response) instance: an ordered dialogue history and the
/// reply it led to, optionally labeled with the domain it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueExample {
    pub context: Vec<Utterance>,
    pub response: Utterance,
    /// Provenance label. Stamped with the corpus domain when the example
    /// joins a [`Corpus`]; kept when corpora are mixed.
    pub source_domain: Option<String>,
}

impl DialogueExample {
    /// Build an example under the default limits (10 turns, 50 tokens).
    pub fn new(context: Vec<Utterance>, response: Utterance) -> Result<Self, CorpusError> {
        Self::with_limits(context, response, Limits::default())
    }

    /// Build an example, keeping the most recent `max_context_turns` turns
    /// and cutting every utterance after `max_utterance_tokens` tokens.
    pub fn with_limits(
        context: Vec<Utterance>,
        response: Utterance,
        limits: Limits,
    ) -> Result<Self, CorpusError> {
        if context.is_empty() {
            return Err(CorpusError::EmptyUtterance);
        }
        let skip = context.len().saturating_sub(limits.max_context_turns);
        let context = context
            .into_iter()
            .skip(skip)
            .map(|u| truncate_utterance(u, limits.max_utterance_tokens))
            .collect();
        let response = truncate_utterance(response, limits.max_utterance_tokens);
        Ok(DialogueExample {
            context,
            response,
            source_domain: None,
        })
    }

    /// Every utterance of the example, context turns first, response last.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.context.iter().chain(std::iter::once(&self.response))
    }
}

fn truncate_utterance(u: Utterance, max_tokens: usize) -> Utterance {
    let cut = truncate_tokens(&u.text, max_tokens);
    if cut.len() == u.text.len() {
        u
    } else {
        Utterance {
            text: cut,
            speaker: u.speaker,
        }
    }
}

/// Corpus split label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An ordered collection of dialogue examples from one domain (or a labeled
/// mixture). Example order is stable across load/save round trips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub domain: String,
    pub split: Split,
    pub examples: Vec<DialogueExample>,
}

/// Domain label a corpus gets when its records disagree on provenance.
pub const MIXED_DOMAIN_LABEL: &str = "mixed";

impl Corpus {
    /// Assemble a corpus, stamping unlabeled examples with `domain`.
    pub fn new(
        domain: &str,
        split: Split,
        examples: Vec<DialogueExample>,
    ) -> Result<Self, CorpusError> {
        if domain.is_empty() {
            return Err(CorpusError::EmptyDomain);
        }
        let examples = examples
            .into_iter()
            .map(|mut e| {
                if e.source_domain.is_none() {
                    e.source_domain = Some(domain.to_string());
                }
                e
            })
            .collect();
        Ok(Corpus {
            domain: domain.to_string(),
            split,
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// On-disk record. Field order here fixes the serialized field order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    context: Vec<String>,
    response: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    speakers: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

/// Load a corpus from a line-delimited JSON file.
///
/// All text is normalized on the way in. The corpus domain is the single
/// distinct per-record `domain` value when one exists, [`MIXED_DOMAIN_LABEL`]
/// when records disagree, and the file stem (up to the first `.`) when no
/// record carries a domain. Records must agree on `split`; absent means
/// `train`. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with_limits(path, Limits::default())
}

/// [`load_corpus`] with explicit length caps.
pub fn load_corpus_with_limits(path: &Path, limits: Limits) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut examples = Vec::new();
    let mut domains: BTreeSet<String> = BTreeSet::new();
    let mut split: Option<(Split, usize)> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                message: e.to_string(),
            })?;
        let bad = |message: String| CorpusError::BadRecord {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };

        if let Some(speakers) = &record.speakers {
            if speakers.len() != record.context.len() {
                return Err(bad(format!(
                    "speakers has {} entries but context has {} turns",
                    speakers.len(),
                    record.context.len()
                )));
            }
        }
        if record.context.is_empty() {
            return Err(bad("context must contain at least one utterance".into()));
        }

        let mut context = Vec::with_capacity(record.context.len());
        for (i, raw) in record.context.iter().enumerate() {
            let speaker = record
                .speakers
                .as_ref()
                .map(|s| s[i].as_str())
                .unwrap_or("");
            let u = Utterance::with_speaker(raw, speaker)
                .map_err(|_| bad(format!("context[{i}] is empty after normalization")))?;
            context.push(u);
        }
        let response = Utterance::new(&record.response)
            .map_err(|_| bad("response is empty after normalization".into()))?;

        let mut example = DialogueExample::with_limits(context, response, limits)?;
        if let Some(domain) = record.domain {
            domains.insert(domain.clone());
            example.source_domain = Some(domain);
        }

        if let Some(s) = record.split {
            let parsed: Split = s.parse()?;
            match split {
                None => split = Some((parsed, lineno)),
                Some((seen, _)) if seen != parsed => {
                    return Err(CorpusError::InconsistentSplit {
                        path: path.to_path_buf(),
                        line: lineno,
                        a: seen.as_str().to_string(),
                        b: parsed.as_str().to_string(),
                    });
                }
                Some(_) => {}
            }
        }
        examples.push(example);
    }

    let domain = match domains.len() {
        0 => file_stem_label(path),
        1 => domains.into_iter().next().unwrap(),
        _ => MIXED_DOMAIN_LABEL.to_string(),
    };
    let split = split.map(|(s, _)| s).unwrap_or_default();
    Corpus::new(&domain, split, examples)
}

fn file_stem_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let stem = stem.split('.').next().unwrap_or_default();
    if stem.is_empty() {
        "corpus".to_string()
    } else {
        stem.to_string()
    }
}

/// Save a corpus as line-delimited JSON: one record per example, fixed field
/// order, byte-identical output for identical input.
///
/// Response speakers are not part of the file format and are not written.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for example in &corpus.examples {
        let any_speaker = example.context.iter().any(|u| u.speaker.is_some());
        let record = Record {
            context: example.context.iter().map(|u| u.text.clone()).collect(),
            response: example.response.text.clone(),
            speakers: any_speaker.then(|| {
                example
                    .context
                    .iter()
                    .map(|u| u.speaker.clone().unwrap_or_default())
                    .collect()
            }),
            domain: Some(
                example
                    .source_domain
                    .clone()
                    .unwrap_or_else(|| corpus.domain.clone()),
            ),
            split: Some(corpus.split.as_str().to_string()),
        };
        let line = serde_json::to_string(&record).expect("record serialization cannot fail");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}
