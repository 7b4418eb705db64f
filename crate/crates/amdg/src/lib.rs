//! Corpus de-domaining and evaluation toolkit for low-resource,
//! multi-domain dialogue generation.
//!
//! The pipeline this crate implements turns domain-specific dialogue
//! corpora into domain-agnostic training material and measures the result:
//!
//! 1. [`corpus`]: canonical corpus representation, normalization,
//!    tokenization, and line-delimited JSON I/O.
//! 2. [`dictionary`]: per-domain keyword dictionaries, with
//!    extraction-prompt emission, term ingestion, merging, and corpus
//!    statistics.
//! 3. [`dedomain`]: multi-pattern replacement of domain phrases with the
//!    `$P` placeholder token.
//! 4. [`similarity`]: n-gram profiles and cross-domain similarity scores.
//! 5. [`pipeline`]: deterministic low-resource sampling, corpus mixing,
//!    training manifests, and synthetic fixture generation.
//! 6. [`lm`]: an interpolated absolute-discounting n-gram language model
//!    serving as a desk-scale stand-in for the neural trainers the
//!    pipeline feeds, demonstrating the two-stage adaptation effect.
//! 7. [`metrics`]: the evaluation suite of BLEU, ROUGE-L, distinct-n,
//!    embedding similarity, and perplexity aggregation.
//!
//! Everything is deterministic: fixed seeds, stable orderings, and
//! byte-reproducible outputs, so pipeline runs can be audited and compared.

pub mod cli;
pub mod corpus;
pub mod dedomain;
pub mod dictionary;
pub mod lm;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod similarity;

/// Compiles every code block in the guide under `book/` as a doc-test,
/// keeping the book and the library from drifting apart.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/dictionaries.md")]
    mod dictionaries {}
    #[doc = include_str!("../../../book/src/dedomaining.md")]
    mod dedomaining {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/language-model.md")]
    mod language_model {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
