//! N-gram domain profiles and cross-domain similarity.
//!
//! The similarity of domain A relative to domain B at order n is the
//! n-gram recall
//!
//! ```text
//! Similarity_A2B(n) = 100 * |A_n ∩ B_n| / |B_n|
//! ```
//!
//! where `A_n` and `B_n` are the n-gram sets of the two domains' training
//! corpora, conventionally after de-domaining. The default interpretation
//! is type-based (unique n-gram sets); a token-weighted mode weights the
//! intersection and denominator by occurrence counts in B. The aggregate
//! `O2X` score for a target domain X is the mean similarity of every other
//! domain relative to X.
//!
//! N-grams never cross utterance boundaries: context turns and responses
//! are independent expression units.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PLACEHOLDER};

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("n-gram order {n} outside this profile's range 1..={max_n}")]
    InvalidOrder { n: usize, max_n: usize },
    #[error("duplicate domain label {0:?} in similarity table input")]
    DuplicateDomain(String),
    #[error("similarity table needs at least two profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("{path}: unsupported profile format (expected header {expected:?})")]
    UnsupportedFormat { path: PathBuf, expected: String },
    #[error("{path}: line {line}: {message}")]
    MalformedProfile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Default maximum n-gram order, matching the four-column Uni/Bi/Tri/Quad
/// report layout.
pub const DEFAULT_MAX_N: usize = 4;

const PROFILE_HEADER: &str = "amdg-ngram-profile v1";

/// Per-domain n-gram inventory: for each order `n` in `1..=max_n`, the
/// n-grams (space-joined token tuples) with occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramProfile {
    pub domain: String,
    pub max_n: usize,
    /// Advisory flag: whether the placeholder token occurred anywhere in
    /// the source corpus, indicating it passed through de-domaining.
    pub placeholder_seen: bool,
    /// `levels[n-1]` maps each n-gram to its count (always ≥ 1).
    levels: Vec<BTreeMap<String, u64>>,
}

impl NgramProfile {
    /// The count map for order `n`.
    pub fn level(&self, n: usize) -> Result<&BTreeMap<String, u64>, SimilarityError> {
        if n == 0 || n > self.max_n {
            return Err(SimilarityError::InvalidOrder {
                n,
                max_n: self.max_n,
            });
        }
        Ok(&self.levels[n - 1])
    }

    /// Distinct n-grams at order `n`.
    pub fn distinct(&self, n: usize) -> Result<usize, SimilarityError> {
        Ok(self.level(n)?.len())
    }

    /// Total n-gram occurrences at order `n`.
    pub fn total(&self, n: usize) -> Result<u64, SimilarityError> {
        Ok(self.level(n)?.values().sum())
    }
}

/// Build the n-gram profile of a corpus for orders `1..=max_n`.
///
/// Every context utterance and the response contribute independently; an
/// utterance shorter than `n` tokens contributes no n-grams at that order.
/// An empty corpus yields empty levels.
pub fn build_profile(corpus: &Corpus, max_n: usize) -> NgramProfile {
    let mut levels: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); max_n];
    let mut placeholder_seen = false;
    for example in &corpus.examples {
        for utterance in example.utterances() {
            let tokens = utterance.tokens();
            let tokens = tokens.as_slice();
            placeholder_seen |= tokens.iter().any(|t| t == PLACEHOLDER);
            for (n, level) in levels.iter_mut().enumerate() {
                let n = n + 1;
                if tokens.len() < n {
                    continue;
                }
                for window in tokens.windows(n) {
                    *level.entry(window.join(" ")).or_insert(0) += 1;
                }
            }
        }
    }
    NgramProfile {
        domain: corpus.domain.clone(),
        max_n,
        placeholder_seen,
        levels,
    }
}

/// How n-gram overlap is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Unique n-gram sets: every distinct n-gram counts once.
    #[default]
    Type,
    /// Intersection and denominator weighted by occurrence counts in the
    /// reference profile B.
    Token,
}

/// One similarity score. `empty_reference` flags the degenerate case where
/// B has no n-grams at this order, in which the score is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub score: f64,
    pub empty_reference: bool,
}

/// The similarity of domain `a` relative to domain `b` at order `n`, in
/// [0, 100].
pub fn ngram_similarity(
    a: &NgramProfile,
    b: &NgramProfile,
    n: usize,
    mode: WeightMode,
) -> Result<SimilarityScore, SimilarityError> {
    let a_level = a.level(n)?;
    let b_level = b.level(n)?;
    let (hit, total) = match mode {
        WeightMode::Type => {
            let hit = b_level.keys().filter(|g| a_level.contains_key(*g)).count() as u64;
            (hit, b_level.len() as u64)
        }
        WeightMode::Token => {
            let hit = b_level
                .iter()
                .filter(|(g, _)| a_level.contains_key(*g))
                .map(|(_, c)| *c)
                .sum();
            (hit, b_level.values().sum())
        }
    };
    if total == 0 {
        return Ok(SimilarityScore {
            score: 0.0,
            empty_reference: true,
        });
    }
    Ok(SimilarityScore {
        score: 100.0 * hit as f64 / total as f64,
        empty_reference: false,
    })
}

/// One row of the similarity report: the target domain and its O2X score
/// for orders 1 through 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub domain: String,
    pub uni: f64,
    pub bi: f64,
    pub tri: f64,
    pub quad: f64,
    /// True when any contributing score hit an empty reference level.
    pub empty_reference: bool,
}

impl SimilarityRow {
    pub fn score(&self, n: usize) -> Option<f64> {
        match n {
            1 => Some(self.uni),
            2 => Some(self.bi),
            3 => Some(self.tri),
            4 => Some(self.quad),
            _ => None,
        }
    }
}

/// Cross-domain similarity report: one row per target domain, in input
/// order, scores in [0, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTable {
    pub mode: WeightMode,
    pub rows: Vec<SimilarityRow>,
}

/// Compute O2X for every domain: the mean similarity of all other domains
/// relative to it, at orders 1 through 4. Rows follow input profile order.
pub fn similarity_table(
    profiles: &[NgramProfile],
    mode: WeightMode,
) -> Result<SimilarityTable, SimilarityError> {
    if profiles.len() < 2 {
        return Err(SimilarityError::TooFewProfiles(profiles.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.domain.as_str()) {
            return Err(SimilarityError::DuplicateDomain(p.domain.clone()));
        }
    }
    let mut rows = Vec::with_capacity(profiles.len());
    for target in profiles {
        let mut scores = [0.0f64; 4];
        let mut empty_reference = false;
        for (i, slot) in scores.iter_mut().enumerate() {
            let n = i + 1;
            let mut sum = 0.0;
            let mut count = 0usize;
            for other in profiles.iter().filter(|p| p.domain != target.domain) {
                let s = ngram_similarity(other, target, n, mode)?;
                sum += s.score;
                empty_reference |= s.empty_reference;
                count += 1;
            }
            *slot = sum / count as f64;
        }
        rows.push(SimilarityRow {
            domain: target.domain.clone(),
            uni: scores[0],
            bi: scores[1],
            tri: scores[2],
            quad: scores[3],
            empty_reference,
        });
    }
    Ok(SimilarityTable { mode, rows })
}

/// Write a profile as a line-based text dump: a version header, a JSON
/// metadata line, then one `n<TAB>count<TAB>gram` line per n-gram in
/// (order, gram) order. Deterministic for identical profiles.
pub fn save_profile(profile: &NgramProfile, path: &Path) -> Result<(), SimilarityError> {
    let io_err = |source| SimilarityError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{PROFILE_HEADER}").map_err(io_err)?;
    let meta = serde_json::json!({
        "domain": profile.domain,
        "max_n": profile.max_n,
        "placeholder_seen": profile.placeholder_seen,
    });
    writeln!(w, "{meta}").map_err(io_err)?;
    for (i, level) in profile.levels.iter().enumerate() {
        for (gram, count) in level {
            writeln!(w, "{}\t{}\t{}", i + 1, count, gram).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Load a profile written by [`save_profile`].
pub fn load_profile(path: &Path) -> Result<NgramProfile, SimilarityError> {
    let io_err = |source| SimilarityError::Io {
        path: path.to_path_buf(),
        source,
    };
    let malformed = |line: usize, message: String| SimilarityError::MalformedProfile {
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
    if header != PROFILE_HEADER {
        return Err(SimilarityError::UnsupportedFormat {
            path: path.to_path_buf(),
            expected: PROFILE_HEADER.to_string(),
        });
    }

    #[derive(Deserialize)]
    struct Meta {
        domain: String,
        max_n: usize,
        placeholder_seen: bool,
    }
    let meta_line = lines
        .next()
        .ok_or_else(|| malformed(2, "missing metadata line".into()))?
        .1
        .map_err(io_err)?;
    let meta: Meta =
        serde_json::from_str(&meta_line).map_err(|e| malformed(2, e.to_string()))?;
    if meta.max_n == 0 {
        return Err(malformed(2, "max_n must be at least 1".into()));
    }

    let mut levels: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); meta.max_n];
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(io_err)?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let entry = (|| {
            let n: usize = parts.next()?.parse().ok()?;
            let count: u64 = parts.next()?.parse().ok()?;
            let gram = parts.next()?;
            Some((n, count, gram))
        })();
        let (n, count, gram) = entry
            .ok_or_else(|| malformed(lineno, "expected n<TAB>count<TAB>gram".into()))?;
        if n == 0 || n > meta.max_n {
            return Err(malformed(lineno, format!("order {n} outside 1..={}", meta.max_n)));
        }
        if count == 0 {
            return Err(malformed(lineno, "count must be at least 1".into()));
        }
        if levels[n - 1].insert(gram.to_string(), count).is_some() {
            return Err(malformed(lineno, format!("duplicate {n}-gram {gram:?}")));
        }
    }
    Ok(NgramProfile {
        domain: meta.domain,
        max_n: meta.max_n,
        placeholder_seen: meta.placeholder_seen,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueExample, Split, Utterance};
    use crate::rng::SplitMix64;

    fn corpus_from(domain: &str, utterance_groups: &[&[&str]]) -> Corpus {
        let examples = utterance_groups
            .iter()
            .map(|texts| {
                let mut us: Vec<Utterance> =
                    texts.iter().map(|t| Utterance::new(t).unwrap()).collect();
                let response = us.pop().unwrap();
                DialogueExample::new(us, response).unwrap()
            })
            .collect();
        Corpus::new(domain, Split::Train, examples).unwrap()
    }

    #[test]
    fn single_utterance_levels_by_definition() {
        // one example: context "a b c", response "z" (kept separate)
        let corpus = corpus_from("d", &[&["a b c", "z"]]);
        let p = build_profile(&corpus, 4);
        let uni: Vec<&str> = p.level(1).unwrap().keys().map(String::as_str).collect();
        assert_eq!(uni, vec!["a", "b", "c", "z"]);
        let bi: Vec<&str> = p.level(2).unwrap().keys().map(String::as_str).collect();
        assert_eq!(bi, vec!["a b", "b c"]);
        let tri: Vec<&str> = p.level(3).unwrap().keys().map(String::as_str).collect();
        assert_eq!(tri, vec!["a b c"]);
        assert!(p.level(4).unwrap().is_empty());
    }

    #[test]
    fn empty_corpus_empty_profile() {
        let corpus = Corpus::new("d", Split::Train, vec![]).unwrap();
        let p = build_profile(&corpus, 4);
        for n in 1..=4 {
            assert!(p.level(n).unwrap().is_empty());
        }
        assert!(!p.placeholder_seen);
    }

    #[test]
    fn placeholder_flag_recorded() {
        let corpus = corpus_from("d", &[&["know the $P", "ok"]]);
        assert!(build_profile(&corpus, 2).placeholder_seen);
    }

    #[test]
    fn ngrams_never_cross_utterances() {
        let split = corpus_from("d", &[&["a b", "c d"]]);
        let joined = corpus_from("d", &[&["a b c d", "x"]]);
        let p_split = build_profile(&split, 2);
        let p_joined = build_profile(&joined, 2);
        assert!(!p_split.level(2).unwrap().contains_key("b c"));
        assert!(p_joined.level(2).unwrap().contains_key("b c"));
    }

    #[test]
    fn profile_matches_sliding_window_oracle() {
        let mut rng = SplitMix64::new(31);
        let vocab = ["a", "b", "c", "d", "$P"];
        for _ in 0..50 {
            let n_examples = 1 + rng.next_below(5) as usize;
            let mut groups: Vec<Vec<String>> = Vec::new();
            for _ in 0..n_examples {
                let n_utts = 2 + rng.next_below(3) as usize;
                groups.push(
                    (0..n_utts)
                        .map(|_| {
                            let len = 1 + rng.next_below(6) as usize;
                            (0..len)
                                .map(|_| vocab[rng.next_below(vocab.len() as u64) as usize])
                                .collect::<Vec<_>>()
                                .join(" ")
                        })
                        .collect(),
                );
            }
            let groups_ref: Vec<Vec<&str>> = groups
                .iter()
                .map(|g| g.iter().map(String::as_str).collect())
                .collect();
            let groups_slices: Vec<&[&str]> =
                groups_ref.iter().map(Vec::as_slice).collect();
            let corpus = corpus_from("d", &groups_slices);
            let profile = build_profile(&corpus, 4);

            // naive sliding-window oracle over the same utterances
            let mut want: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); 4];
            for example in &corpus.examples {
                for u in example.utterances() {
                    let toks = u.tokens();
                    let toks = toks.as_slice();
                    for n in 1..=4usize {
                        for start in 0..toks.len().saturating_sub(n - 1) {
                            let gram = toks[start..start + n].join(" ");
                            *want[n - 1].entry(gram).or_insert(0) += 1;
                        }
                    }
                }
            }
            for n in 1..=4usize {
                assert_eq!(profile.level(n).unwrap(), &want[n - 1]);
            }
        }
    }

    #[test]
    fn self_similarity_is_100() {
        let corpus = corpus_from("d", &[&["a b c d e", "f g h"]]);
        let p = build_profile(&corpus, 4);
        for n in 1..=4 {
            for mode in [WeightMode::Type, WeightMode::Token] {
                let s = ngram_similarity(&p, &p, n, mode).unwrap();
                assert_eq!(s.score, 100.0, "n={n} mode={mode:?}");
                assert!(!s.empty_reference);
            }
        }
    }

    #[test]
    fn disjoint_vocabularies_score_zero() {
        let a = build_profile(&corpus_from("a", &[&["a b", "c"]]), 2);
        let b = build_profile(&corpus_from("b", &[&["x y", "z"]]), 2);
        for n in 1..=2 {
            assert_eq!(ngram_similarity(&a, &b, n, WeightMode::Type).unwrap().score, 0.0);
        }
    }

    #[test]
    fn hand_computed_pair() {
        // A tokens "a b c", B tokens "b c d":
        // uni: |{b,c}| / |{b,c,d}| = 2/3; bi: |{b c}| / |{b c, c d}| = 1/2
        let a = build_profile(&corpus_from("a", &[&["a b c", "a"]]), 2);
        let b = build_profile(&corpus_from("b", &[&["b c d", "b"]]), 2);
        let uni = ngram_similarity(&a, &b, 1, WeightMode::Type).unwrap().score;
        let bi = ngram_similarity(&a, &b, 2, WeightMode::Type).unwrap().score;
        assert!((uni - 100.0 * 2.0 / 3.0).abs() < 1e-9);
        assert!((bi - 50.0).abs() < 1e-9);
    }

    #[test]
    fn token_weighted_counts_reference_occurrences() {
        // B corpus "a a b": counts a=2, b=1. A contains only "a".
        // weighted: 2/3; type-based: 1/2.
        let a = build_profile(&corpus_from("a", &[&["a", "a"]]), 1);
        let b = build_profile(&corpus_from("b", &[&["a a b", "a"]]), 1);
        let token = ngram_similarity(&a, &b, 1, WeightMode::Token).unwrap().score;
        let ty = ngram_similarity(&a, &b, 1, WeightMode::Type).unwrap().score;
        assert!((token - 100.0 * 3.0 / 4.0).abs() < 1e-9);
        assert!((ty - 50.0).abs() < 1e-9);
    }

    #[test]
    fn empty_reference_level_flagged_zero() {
        // both corpora have short utterances only: no 4-grams anywhere
        let a = build_profile(&corpus_from("a", &[&["a b", "c"]]), 4);
        let b = build_profile(&corpus_from("b", &[&["a b", "c"]]), 4);
        let s = ngram_similarity(&a, &b, 4, WeightMode::Type).unwrap();
        assert_eq!(s.score, 0.0);
        assert!(s.empty_reference);
    }

    #[test]
    fn order_out_of_range_is_error() {
        let p = build_profile(&corpus_from("a", &[&["a b", "c"]]), 2);
        assert!(matches!(
            ngram_similarity(&p, &p, 3, WeightMode::Type),
            Err(SimilarityError::InvalidOrder { n: 3, max_n: 2 })
        ));
        assert!(p.level(0).is_err());
    }

    #[test]
    fn superset_never_decreases_similarity() {
        let mut rng = SplitMix64::new(8);
        let vocab = ["a", "b", "c", "d", "e"];
        for _ in 0..100 {
            let mk = |rng: &mut SplitMix64, lines: usize| -> Vec<Vec<String>> {
                (0..lines)
                    .map(|_| {
                        let len = 1 + rng.next_below(5) as usize;
                        vec![(0..len)
                            .map(|_| vocab[rng.next_below(5) as usize])
                            .collect::<Vec<_>>()
                            .join(" "), "z".to_string()]
                    })
                    .collect()
            };
            let base = mk(&mut rng, 2);
            let mut extended = base.clone();
            extended.extend(mk(&mut rng, 1));
            let to_corpus = |groups: &[Vec<String>], d: &str| {
                let refs: Vec<Vec<&str>> = groups
                    .iter()
                    .map(|g| g.iter().map(String::as_str).collect())
                    .collect();
                let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
                corpus_from(d, &slices)
            };
            let b = build_profile(&to_corpus(&mk(&mut rng, 2), "b"), 2);
            let small = build_profile(&to_corpus(&base, "a"), 2);
            let large = build_profile(&to_corpus(&extended, "a"), 2);
            for n in 1..=2 {
                let s = ngram_similarity(&small, &b, n, WeightMode::Type).unwrap().score;
                let l = ngram_similarity(&large, &b, n, WeightMode::Type).unwrap().score;
                assert!(l >= s - 1e-12, "n={n}: {l} < {s}");
            }
        }
    }

    #[test]
    fn table_of_two_is_the_pairwise_score() {
        let a = build_profile(&corpus_from("a", &[&["a b c d", "a"]]), 4);
        let b = build_profile(&corpus_from("b", &[&["b c d e", "b"]]), 4);
        let table = similarity_table(&[a.clone(), b.clone()], WeightMode::Type).unwrap();
        assert_eq!(table.rows.len(), 2);
        let o2b = &table.rows[1];
        for n in 1..=4 {
            let direct = ngram_similarity(&a, &b, n, WeightMode::Type).unwrap().score;
            assert_eq!(o2b.score(n).unwrap(), direct);
        }
    }

    #[test]
    fn three_domain_table_hand_computed() {
        let a = build_profile(&corpus_from("a", &[&["p q r s", "p"]]), 4);
        let b = build_profile(&corpus_from("b", &[&["q r s t", "q"]]), 4);
        let c = build_profile(&corpus_from("c", &[&["p q x y", "p"]]), 4);
        let table = similarity_table(&[a, b, c], WeightMode::Type).unwrap();
        let o2a = &table.rows[0];
        // uni: (B→A 3/4 + C→A 2/4)/2 = 62.5
        assert!((o2a.uni - 62.5).abs() < 1e-9);
        // bi: (2/3 + 1/3)/2 = 50.0
        assert!((o2a.bi - 50.0).abs() < 1e-9);
        // tri: (1/2 + 0)/2 = 25.0
        assert!((o2a.tri - 25.0).abs() < 1e-9);
        // quad: (0 + 0)/2 = 0
        assert_eq!(o2a.quad, 0.0);
    }

    #[test]
    fn table_rejects_duplicates_and_singletons() {
        let a = build_profile(&corpus_from("a", &[&["p q r s", "p"]]), 4);
        assert!(matches!(
            similarity_table(&[a.clone(), a.clone()], WeightMode::Type),
            Err(SimilarityError::DuplicateDomain(_))
        ));
        assert!(matches!(
            similarity_table(&[a], WeightMode::Type),
            Err(SimilarityError::TooFewProfiles(1))
        ));
    }

    #[test]
    fn scores_stay_in_range() {
        let mut rng = SplitMix64::new(77);
        let vocab = ["a", "b", "c"];
        for _ in 0..50 {
            let mk = |rng: &mut SplitMix64, d: &str| {
                let len = 1 + rng.next_below(6) as usize;
                let text: String = (0..len)
                    .map(|_| vocab[rng.next_below(3) as usize])
                    .collect::<Vec<_>>()
                    .join(" ");
                build_profile(&corpus_from(d, &[&[text.as_str(), "z"]]), 4)
            };
            let a = mk(&mut rng, "a");
            let b = mk(&mut rng, "b");
            for n in 1..=4 {
                for mode in [WeightMode::Type, WeightMode::Token] {
                    let s = ngram_similarity(&a, &b, n, mode).unwrap().score;
                    assert!((0.0..=100.0).contains(&s));
                }
            }
        }
    }

    #[test]
    fn profile_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.profile");
        let corpus = corpus_from("电影", &[&["你 知道 $P 吗", "知道 呀"], &["a b c d e", "ok"]]);
        let profile = build_profile(&corpus, 4);
        save_profile(&profile, &path).unwrap();
        let loaded = load_profile(&path).unwrap();
        assert_eq!(loaded, profile);
    }

    #[test]
    fn profile_save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_from("d", &[&["a b c", "d e"]]);
        let profile = build_profile(&corpus, 4);
        let p1 = dir.path().join("1.profile");
        let p2 = dir.path().join("2.profile");
        save_profile(&profile, &p1).unwrap();
        save_profile(&profile, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn profile_load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.profile");

        std::fs::write(&path, "something else\n").unwrap();
        assert!(matches!(
            load_profile(&path),
            Err(SimilarityError::UnsupportedFormat { .. })
        ));

        std::fs::write(&path, format!("{PROFILE_HEADER}\nnot json\n")).unwrap();
        assert!(matches!(
            load_profile(&path),
            Err(SimilarityError::MalformedProfile { line: 2, .. })
        ));

        let meta = "{\"domain\":\"d\",\"max_n\":2,\"placeholder_seen\":false}";
        std::fs::write(&path, format!("{PROFILE_HEADER}\n{meta}\n3\t1\ta b c\n")).unwrap();
        assert!(matches!(
            load_profile(&path),
            Err(SimilarityError::MalformedProfile { line: 3, .. })
        ));
    }
}
