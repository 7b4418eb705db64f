//! De-domaining: replacing domain phrases with the placeholder token.
//!
//! A [`Matcher`] compiles a domain dictionary into a character-level trie.
//! Matching is leftmost-longest and non-overlapping: scanning left to
//! right, the longest dictionary term starting at the current character is
//! selected, and the scan resumes after it. Matching operates on
//! normalized raw text with character offsets, not on token sequences, so
//! phrases spanning script boundaries match exactly. Case-insensitivity
//! for Latin comes from normalization; CJK matches exactly.

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, DialogueExample, Utterance, PLACEHOLDER};
use crate::dictionary::DomainDictionary;

/// One replaced occurrence. `start..end` are character offsets into the
/// input text (exclusive end); spans within one text are pairwise disjoint
/// and sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementSpan {
    pub start: usize,
    pub end: usize,
    pub matched_term: String,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(char, usize)>,
    terminal: bool,
}

/// Compiled multi-pattern matcher over a dictionary's term set. Immutable
/// after compilation and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Matcher {
    nodes: Vec<TrieNode>,
}

impl Matcher {
    /// Compile the dictionary's terms into a trie. An empty dictionary
    /// yields a matcher that never matches.
    pub fn compile(dict: &DomainDictionary) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for term in dict.terms() {
            let mut node = 0usize;
            for c in term.chars() {
                node = match nodes[node].children.iter().find(|(ch, _)| *ch == c) {
                    Some(&(_, next)) => next,
                    None => {
                        let next = nodes.len();
                        nodes.push(TrieNode::default());
                        nodes[node].children.push((c, next));
                        next
                    }
                };
            }
            nodes[node].terminal = true;
        }
        Matcher { nodes }
    }

    /// Whether `text` as a whole is a dictionary term.
    pub fn is_term(&self, text: &str) -> bool {
        let mut node = 0usize;
        for c in text.chars() {
            match self.nodes[node].children.iter().find(|(ch, _)| *ch == c) {
                Some(&(_, next)) => node = next,
                None => return false,
            }
        }
        !text.is_empty() && self.nodes[node].terminal
    }

    /// Length in chars of the longest term starting at `chars[at]`.
    fn longest_match_at(&self, chars: &[char], at: usize) -> Option<usize> {
        let mut node = 0usize;
        let mut best = None;
        for (depth, &c) in chars[at..].iter().enumerate() {
            match self.nodes[node].children.iter().find(|(ch, _)| *ch == c) {
                Some(&(_, next)) => node = next,
                None => break,
            }
            if self.nodes[node].terminal {
                best = Some(depth + 1);
            }
        }
        best
    }

    /// Leftmost-longest non-overlapping matches in `text` (normalized).
    pub fn find_spans(&self, text: &str) -> Vec<ReplacementSpan> {
        let chars: Vec<char> = text.chars().collect();
        let mut spans = Vec::new();
        let mut i = 0usize;
        while i < chars.len() {
            match self.longest_match_at(&chars, i) {
                Some(len) => {
                    spans.push(ReplacementSpan {
                        start: i,
                        end: i + len,
                        matched_term: chars[i..i + len].iter().collect(),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        spans
    }
}

/// Replace every leftmost-longest match in `text` with the placeholder
/// token, returning the rewritten text and the spans (offsets into the
/// input). A single space is inserted around the placeholder wherever the
/// neighbouring character is not already a space, so the output tokenizes
/// with `$P` as a standalone token and stays normalized.
pub fn dedomain_text(matcher: &Matcher, text: &str) -> (String, Vec<ReplacementSpan>) {
    let spans = matcher.find_spans(text);
    if spans.is_empty() {
        return (text.to_string(), spans);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut cursor = 0usize;
    for span in &spans {
        out.extend(&chars[cursor..span.start]);
        if out.chars().next_back().is_some_and(|c| c != ' ') {
            out.push(' ');
        }
        out.push_str(PLACEHOLDER);
        cursor = span.end;
        if chars.get(cursor).is_some_and(|&c| c != ' ') {
            out.push(' ');
        }
    }
    out.extend(&chars[cursor..]);
    (out, spans)
}

/// Replacement audit for one example: spans per context turn and for the
/// response, with offsets into each utterance's own text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleReplacements {
    pub example_index: usize,
    pub context: Vec<Vec<ReplacementSpan>>,
    pub response: Vec<ReplacementSpan>,
}

impl ExampleReplacements {
    pub fn match_events(&self) -> usize {
        self.context.iter().map(Vec::len).sum::<usize>() + self.response.len()
    }

    fn spans(&self) -> impl Iterator<Item = &ReplacementSpan> {
        self.context.iter().flatten().chain(self.response.iter())
    }
}

/// Corpus-wide replacement audit. Totals always equal the sums over the
/// per-example data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedomainReport {
    pub examples: Vec<ExampleReplacements>,
    pub match_events: usize,
    pub replaced_tokens: usize,
    pub examples_touched: usize,
}

/// De-domain every context utterance and response of `corpus`. Example
/// order is preserved; speakers, domain labels, and split carry over.
pub fn dedomain_corpus(matcher: &Matcher, corpus: &Corpus) -> (Corpus, DedomainReport) {
    let mut examples = Vec::with_capacity(corpus.len());
    let mut per_example = Vec::with_capacity(corpus.len());
    let mut match_events = 0usize;
    let mut replaced_tokens = 0usize;
    let mut examples_touched = 0usize;

    for (example_index, example) in corpus.examples.iter().enumerate() {
        let rewrite = |u: &Utterance| {
            let (text, spans) = dedomain_text(matcher, u.text());
            let rewritten = Utterance::from_normalized(text, u.speaker().map(str::to_string));
            (rewritten, spans)
        };
        let (context, context_spans): (Vec<_>, Vec<_>) =
            example.context.iter().map(rewrite).unzip();
        let (response, response_spans) = rewrite(&example.response);

        let replacements = ExampleReplacements {
            example_index,
            context: context_spans,
            response: response_spans,
        };
        match_events += replacements.match_events();
        replaced_tokens += replacements
            .spans()
            .map(|s| tokenize(&s.matched_term).len())
            .sum::<usize>();
        if replacements.match_events() > 0 {
            examples_touched += 1;
        }
        per_example.push(replacements);

        // Built directly: re-running the length caps here could truncate
        // text whose token count grew (a match inside a longer word splits
        // it around the placeholder).
        examples.push(DialogueExample {
            context,
            response,
            source_domain: example.source_domain.clone(),
        });
    }

    let out = Corpus::new(&corpus.domain, corpus.split, examples)
        .expect("domain label carries over non-empty");
    let report = DedomainReport {
        examples: per_example,
        match_events,
        replaced_tokens,
        examples_touched,
    };
    (out, report)
}
