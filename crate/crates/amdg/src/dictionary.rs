//! Per-domain keyword dictionaries: ingestion of extracted terms and term
//! banks, merging with provenance precedence, extraction-prompt emission,
//! and the coverage/replacement statistics used to audit a dictionary
//! against its training corpus.
//!
//! Dictionary files are UTF-8, one term per line, with an optional
//! tab-separated provenance column (`llm`, `termbank`, or `manual`).
//! Lines starting with `#` are comments.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, tokenize, Corpus, PLACEHOLDER};
use crate::dedomain::Matcher;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("cannot merge dictionaries for domains {a:?} and {b:?}")]
    DomainMismatch { a: String, b: String },
    #[error("{path}: line {line}: unknown provenance {label:?} (expected llm, termbank, or manual)")]
    UnknownProvenance {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("dictionary statistics are undefined on an empty corpus")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where a dictionary term came from. Ordering is merge precedence:
/// manually curated terms beat term-bank imports, which beat LLM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Llm,
    Termbank,
    Manual,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Llm => "llm",
            Provenance::Termbank => "termbank",
            Provenance::Manual => "manual",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(Provenance::Llm),
            "termbank" => Ok(Provenance::Termbank),
            "manual" => Ok(Provenance::Manual),
            other => Err(other.to_string()),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One normalized dictionary term with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub term: String,
    pub provenance: Provenance,
}

/// The keyword set for one domain. Terms are unique and kept sorted, so a
/// dictionary's identity is independent of insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDictionary {
    domain: String,
    entries: BTreeMap<String, Provenance>,
}

impl DomainDictionary {
    pub fn new(domain: &str) -> Self {
        DomainDictionary {
            domain: domain.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn provenance(&self, term: &str) -> Option<Provenance> {
        self.entries.get(term).copied()
    }

    /// Terms in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = DictEntry> + '_ {
        self.entries.iter().map(|(term, &provenance)| DictEntry {
            term: term.clone(),
            provenance,
        })
    }

    /// Insert an entry, keeping the higher-precedence provenance when the
    /// term is already present.
    pub fn insert(&mut self, entry: DictEntry) {
        match self.entries.entry(entry.term) {
            Entry::Vacant(v) => {
                v.insert(entry.provenance);
            }
            Entry::Occupied(mut o) => {
                if entry.provenance > *o.get() {
                    o.insert(entry.provenance);
                }
            }
        }
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = DictEntry>) {
        for e in entries {
            self.insert(e);
        }
    }
}

/// Outcome of [`ingest_terms`]: the accepted entries, in first-occurrence
/// order, plus how many input lines were dropped (empty after
/// normalization, placeholder-bearing, or duplicate).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOutcome {
    pub entries: Vec<DictEntry>,
    pub dropped: usize,
}

/// Normalize raw term lines into dictionary entries.
///
/// Each line goes through [`normalize_text`]. Lines that end up empty,
/// equal to or containing the placeholder `$P`, or duplicating an earlier
/// line are dropped and counted. Terms containing the placeholder are
/// rejected (not just the bare placeholder) because they would match
/// already-de-domained text and break replacement idempotence.
pub fn ingest_terms<I, S>(lines: I, provenance: Provenance) -> IngestOutcome
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::new();
    let mut dropped = 0usize;
    for line in lines {
        let term = normalize_text(line.as_ref());
        if term.is_empty() || term.contains(PLACEHOLDER) || !seen.insert(term.clone()) {
            dropped += 1;
            continue;
        }
        entries.push(DictEntry { term, provenance });
    }
    IngestOutcome { entries, dropped }
}

/// Union dictionaries for one domain. On a term present in several inputs,
/// the provenance with the highest precedence wins (manual > termbank >
/// llm), so the merge is associative and commutative.
pub fn merge_dictionaries(
    dicts: &[DomainDictionary],
) -> Result<DomainDictionary, DictionaryError> {
    let domain = dicts.first().map(|d| d.domain.clone()).unwrap_or_default();
    let mut merged = DomainDictionary::new(&domain);
    for dict in dicts {
        if dict.domain != domain {
            return Err(DictionaryError::DomainMismatch {
                a: domain,
                b: dict.domain.clone(),
            });
        }
        merged.extend(dict.entries());
    }
    Ok(merged)
}

/// The extraction prompt sent to an external LLM, with `$Context$` and
/// `$Domain$` slots. The model call itself is out of scope for this
/// toolkit: prompts go out as files, keyword lines come back as files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub text: String,
}

impl PromptTemplate {
    /// Chinese keyword-extraction prompt.
    pub fn chinese() -> Self {
        PromptTemplate {
            text: "文本是$Context$.领域是$Domain$. 请输出 $Domain$关键词. ".to_string(),
        }
    }

    /// English translation of the extraction prompt.
    pub fn english() -> Self {
        PromptTemplate {
            text: "The context is $Context$. The domain is $Domain$. \
                   Please output keywords related to $Domain$."
                .to_string(),
        }
    }

    pub fn custom(text: &str) -> Self {
        PromptTemplate {
            text: text.to_string(),
        }
    }

    pub fn render(&self, context: &str, domain: &str) -> String {
        self.text
            .replace("$Context$", context)
            .replace("$Domain$", domain)
    }
}

/// A rendered prompt tied to the example it was built from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PromptRecord {
    pub example_id: usize,
    pub prompt: String,
}

/// Render one extraction prompt per example, in corpus order. The
/// `$Context$` slot is filled with the example's context turns and response
/// joined by single spaces.
pub fn emit_extraction_prompts(
    corpus: &Corpus,
    domain: &str,
    template: &PromptTemplate,
) -> Vec<PromptRecord> {
    corpus
        .examples
        .iter()
        .enumerate()
        .map(|(example_id, example)| {
            let joined = example
                .utterances()
                .map(|u| u.text())
                .collect::<Vec<_>>()
                .join(" ");
            PromptRecord {
                example_id,
                prompt: template.render(&joined, domain),
            }
        })
        .collect()
}

/// Dictionary-vs-corpus statistics: dictionary size, the fraction of
/// examples with at least one match, and how many tokens the matched spans
/// consume. `match_events` counts replacement occurrences, which can exceed
/// `replaced_tokens` contributions per event only when phrases are short;
/// both are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictStats {
    pub keyword_count: usize,
    pub coverage: f64,
    pub replaced_tokens: usize,
    pub match_events: usize,
}

/// Compute [`DictStats`] for a dictionary against a corpus.
///
/// Coverage is per example over its context and response jointly: an
/// example counts as covered when any of its utterances contains a match.
/// Matching uses the same leftmost-longest semantics as de-domaining, so
/// `replaced_tokens` equals the token count the de-domain pass would
/// remove.
pub fn dictionary_stats(
    corpus: &Corpus,
    dict: &DomainDictionary,
) -> Result<DictStats, DictionaryError> {
    if corpus.is_empty() {
        return Err(DictionaryError::EmptyCorpus);
    }
    let matcher = Matcher::compile(dict);
    let mut covered = 0usize;
    let mut replaced_tokens = 0usize;
    let mut match_events = 0usize;
    for example in &corpus.examples {
        let mut hit = false;
        for utterance in example.utterances() {
            for m in matcher.find_spans(utterance.text()) {
                hit = true;
                match_events += 1;
                replaced_tokens += tokenize(&m.matched_term).len();
            }
        }
        if hit {
            covered += 1;
        }
    }
    Ok(DictStats {
        keyword_count: dict.len(),
        coverage: covered as f64 / corpus.len() as f64,
        replaced_tokens,
        match_events,
    })
}

/// Load a dictionary file. Terms are normalized; lines that normalize to
/// nothing or contain the placeholder are dropped. `default_provenance`
/// applies to lines without a provenance column.
pub fn load_dictionary(
    path: &Path,
    domain: &str,
    default_provenance: Provenance,
) -> Result<DomainDictionary, DictionaryError> {
    let file = File::open(path).map_err(|source| DictionaryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut dict = DomainDictionary::new(domain);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DictionaryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.starts_with('#') {
            continue;
        }
        let (raw_term, provenance) = match line.split_once('\t') {
            Some((term, label)) => {
                let provenance: Provenance =
                    label
                        .trim()
                        .parse()
                        .map_err(|label| DictionaryError::UnknownProvenance {
                            path: path.to_path_buf(),
                            line: idx + 1,
                            label,
                        })?;
                (term, provenance)
            }
            None => (line.as_str(), default_provenance),
        };
        let term = normalize_text(raw_term);
        if term.is_empty() || term.contains(PLACEHOLDER) {
            continue;
        }
        dict.insert(DictEntry { term, provenance });
    }
    Ok(dict)
}

/// Write a dictionary file: sorted terms, tab-separated provenance column.
pub fn save_dictionary(dict: &DomainDictionary, path: &Path) -> Result<(), DictionaryError> {
    let io_err = |source| DictionaryError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for entry in dict.entries() {
        writeln!(writer, "{}\t{}", entry.term, entry.provenance).map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueExample, Split, Utterance};

    fn corpus_of(texts: &[(&str, &str)]) -> Corpus {
        let examples = texts
            .iter()
            .map(|(c, r)| {
                DialogueExample::new(
                    vec![Utterance::new(c).unwrap()],
                    Utterance::new(r).unwrap(),
                )
                .unwrap()
            })
            .collect();
        Corpus::new("film", Split::Train, examples).unwrap()
    }

    #[test]
    fn ingest_folds_dedups_and_drops() {
        let out = ingest_terms(["Avatar", "avatar", ""], Provenance::Llm);
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].term, "avatar");
        assert_eq!(out.dropped, 2);
    }

    #[test]
    fn ingest_rejects_placeholder() {
        let out = ingest_terms(["$P"], Provenance::Llm);
        assert!(out.entries.is_empty());
        assert_eq!(out.dropped, 1);
        // terms containing the placeholder are rejected too
        let out = ingest_terms(["know the $P"], Provenance::Manual);
        assert!(out.entries.is_empty());
    }

    #[test]
    fn ingest_matches_naive_oracle() {
        // naive oracle: normalize, drop empties/placeholder, unique
        let mut rng = crate::rng::SplitMix64::new(42);
        let alphabet = ["Avatar", "AVATAR", "泰坦尼克", "love song", " ", "", "$P", "a"];
        for _ in 0..1000 {
            let n = rng.next_below(6) as usize;
            let lines: Vec<&str> = (0..n)
                .map(|_| alphabet[rng.next_below(alphabet.len() as u64) as usize])
                .collect();
            let got: std::collections::BTreeSet<String> =
                ingest_terms(lines.iter(), Provenance::Llm)
                    .entries
                    .into_iter()
                    .map(|e| e.term)
                    .collect();
            let want: std::collections::BTreeSet<String> = lines
                .iter()
                .map(|l| normalize_text(l))
                .filter(|t| !t.is_empty() && !t.contains(PLACEHOLDER))
                .collect();
            assert_eq!(got, want, "lines: {lines:?}");
        }
    }

    fn dict_with(domain: &str, terms: &[(&str, Provenance)]) -> DomainDictionary {
        let mut d = DomainDictionary::new(domain);
        for (t, p) in terms {
            d.insert(DictEntry {
                term: t.to_string(),
                provenance: *p,
            });
        }
        d
    }

    #[test]
    fn merge_identity_and_union() {
        let a = dict_with("film", &[("a", Provenance::Llm), ("b", Provenance::Llm)]);
        let merged = merge_dictionaries(std::slice::from_ref(&a)).unwrap();
        assert_eq!(merged, a);

        let b = dict_with("film", &[("b", Provenance::Llm), ("c", Provenance::Llm)]);
        let merged = merge_dictionaries(&[a, b]).unwrap();
        let terms: Vec<&str> = merged.terms().collect();
        assert_eq!(terms, vec!["a", "b", "c"]);
    }

    #[test]
    fn merge_provenance_precedence() {
        let llm = dict_with("film", &[("avatar", Provenance::Llm)]);
        let bank = dict_with("film", &[("avatar", Provenance::Termbank)]);
        let m1 = merge_dictionaries(&[llm.clone(), bank.clone()]).unwrap();
        let m2 = merge_dictionaries(&[bank, llm]).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.provenance("avatar"), Some(Provenance::Termbank));
    }

    #[test]
    fn merge_rejects_mismatched_domains() {
        let a = dict_with("film", &[]);
        let b = dict_with("music", &[]);
        match merge_dictionaries(&[a, b]) {
            Err(DictionaryError::DomainMismatch { a, b }) => {
                assert_eq!(a, "film");
                assert_eq!(b, "music");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn prompts_per_example_in_order() {
        let corpus = corpus_of(&[("你 知道 阿凡达 吗", "知道"), ("还有 吗", "有"), ("好", "好")]);
        let prompts = emit_extraction_prompts(&corpus, "Film", &PromptTemplate::english());
        assert_eq!(prompts.len(), 3);
        assert!(prompts[0].prompt.contains("阿凡达"));
        assert!(prompts[0].prompt.contains("Film"));
        assert_eq!(prompts[1].example_id, 1);

        let empty = Corpus::new("film", Split::Train, vec![]).unwrap();
        assert!(emit_extraction_prompts(&empty, "Film", &PromptTemplate::chinese()).is_empty());
    }

    #[test]
    fn stats_empty_dictionary() {
        let corpus = corpus_of(&[("hello there", "hi")]);
        let stats = dictionary_stats(&corpus, &DomainDictionary::new("film")).unwrap();
        assert_eq!(stats.keyword_count, 0);
        assert_eq!(stats.coverage, 0.0);
        assert_eq!(stats.replaced_tokens, 0);
        assert_eq!(stats.match_events, 0);
    }

    #[test]
    fn stats_hand_counted() {
        // 3 examples, dict {avatar}; two examples contain it once each.
        let corpus = corpus_of(&[
            ("do you know avatar", "yes"),
            ("avatar is great", "agreed"),
            ("what else", "nothing"),
        ]);
        let dict = dict_with("film", &[("avatar", Provenance::Llm)]);
        let stats = dictionary_stats(&corpus, &dict).unwrap();
        assert_eq!(stats.keyword_count, 1);
        assert!((stats.coverage - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.replaced_tokens, 2);
        assert_eq!(stats.match_events, 2);
    }

    #[test]
    fn stats_error_on_empty_corpus() {
        let empty = Corpus::new("film", Split::Train, vec![]).unwrap();
        assert!(matches!(
            dictionary_stats(&empty, &DomainDictionary::new("film")),
            Err(DictionaryError::EmptyCorpus)
        ));
    }

    #[test]
    fn stats_monotone_in_dictionary() {
        let corpus = corpus_of(&[
            ("do you know avatar", "yes i do"),
            ("titanic is long", "it is"),
        ]);
        let small = dict_with("film", &[("avatar", Provenance::Llm)]);
        let large = dict_with(
            "film",
            &[("avatar", Provenance::Llm), ("titanic", Provenance::Llm)],
        );
        let s = dictionary_stats(&corpus, &small).unwrap();
        let l = dictionary_stats(&corpus, &large).unwrap();
        assert!(l.coverage >= s.coverage);
        assert!(l.replaced_tokens >= s.replaced_tokens);
        assert_eq!(l.coverage, 1.0);
    }

    #[test]
    fn dictionary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("film.dict");
        let dict = dict_with(
            "film",
            &[
                ("avatar", Provenance::Llm),
                ("泰坦尼克", Provenance::Termbank),
                ("love song", Provenance::Manual),
            ],
        );
        save_dictionary(&dict, &path).unwrap();
        let loaded = load_dictionary(&path, "film", Provenance::Manual).unwrap();
        assert_eq!(loaded, dict);
    }

    #[test]
    fn dictionary_file_comments_and_default_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dict");
        std::fs::write(&path, "# comment\nAvatar\nsong\ttermbank\n").unwrap();
        let dict = load_dictionary(&path, "film", Provenance::Llm).unwrap();
        assert_eq!(dict.provenance("avatar"), Some(Provenance::Llm));
        assert_eq!(dict.provenance("song"), Some(Provenance::Termbank));
        assert_eq!(dict.len(), 2);
    }

    #[test]
    fn dictionary_file_unknown_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dict");
        std::fs::write(&path, "term\tweird\n").unwrap();
        assert!(matches!(
            load_dictionary(&path, "film", Provenance::Llm),
            Err(DictionaryError::UnknownProvenance { line: 1, .. })
        ));
    }
}
