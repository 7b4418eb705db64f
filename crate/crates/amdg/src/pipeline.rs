//! Low-resource pipeline plumbing: deterministic sampling, multi-domain
//! mixing with target exclusion, two-stage training manifests, and a
//! template-driven synthetic corpus generator used to verify the pipeline
//! end to end at desk scale.
//!
//! Everything here is a pure function of its inputs and the seed. The
//! sampler uses the crate's documented SplitMix64 generator (see [`crate::rng`])
//! rather than a platform default, so a given seed reproduces the same
//! subset on every machine.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    load_corpus, Corpus, CorpusError, DialogueExample, Split, Utterance, MIXED_DOMAIN_LABEL,
};
use crate::dictionary::{ingest_terms, DomainDictionary, Provenance};
use crate::rng::{sample_indices, SplitMix64};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sample size {requested} exceeds corpus size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
    #[error("sample plan targets domain {plan:?} but corpus is {corpus:?}")]
    PlanDomainMismatch { plan: String, corpus: String },
    #[error("duplicate domain label {0:?} among corpora to mix")]
    DuplicateDomain(String),
    #[error("cannot mix corpora from different splits ({a} vs {b})")]
    MixedSplits { a: Split, b: Split },
    #[error("stage-1 input {path} belongs to target domain {domain:?}")]
    TargetInStage1 { path: PathBuf, domain: String },
    #[error("mixed corpus {path} contains {count} examples from target domain {domain:?}")]
    TargetInMix {
        path: PathBuf,
        domain: String,
        count: usize,
    },
    #[error("referenced path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("template spec: {0}")]
    BadTemplateSpec(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Non-fatal conditions surfaced by pipeline operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PipelineWarning {
    /// The excluded domain matched none of the corpora to mix.
    ExcludeNotFound { label: String },
    /// Mixing produced an empty corpus.
    EmptyMix,
    /// A ratio rounded down to an empty sample.
    EmptySample { ratio: f64, corpus_size: usize },
}

impl fmt::Display for PipelineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineWarning::ExcludeNotFound { label } => {
                write!(f, "excluded domain {label:?} matched no corpus")
            }
            PipelineWarning::EmptyMix => write!(f, "mixed corpus is empty"),
            PipelineWarning::EmptySample { ratio, corpus_size } => write!(
                f,
                "ratio {ratio} of {corpus_size} examples rounds to an empty sample"
            ),
        }
    }
}

/// Requested sample size: an absolute count or a fraction of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSize {
    Absolute(usize),
    Ratio(f64),
}

/// A deterministic low-resource sampling request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub target_domain: String,
    pub size: SampleSize,
    pub seed: u64,
}

/// Draw a uniform sample without replacement, returning examples in their
/// original corpus order.
///
/// The subset is fully determined by the corpus length and `plan.seed`
/// through the documented SplitMix64 generator, so identical inputs always
/// reproduce the identical subset. Ratios resolve to `round(ratio * len)`
/// examples; a ratio of 1.0 returns the full corpus.
pub fn sample_lowres(corpus: &Corpus, plan: &SamplePlan) -> Result<Corpus, PipelineError> {
    if corpus.domain != plan.target_domain {
        return Err(PipelineError::PlanDomainMismatch {
            plan: plan.target_domain.clone(),
            corpus: corpus.domain.clone(),
        });
    }
    let n = corpus.len();
    let k = match plan.size {
        SampleSize::Absolute(k) => {
            if k > n {
                return Err(PipelineError::SampleTooLarge {
                    requested: k,
                    available: n,
                });
            }
            k
        }
        SampleSize::Ratio(r) => {
            if !(r > 0.0 && r <= 1.0) {
                return Err(PipelineError::InvalidRatio(r));
            }
            (r * n as f64).round() as usize
        }
    };
    let mut rng = SplitMix64::new(plan.seed);
    let indices = sample_indices(&mut rng, n, k);
    let examples = indices
        .into_iter()
        .map(|i| corpus.examples[i].clone())
        .collect();
    Ok(Corpus {
        domain: corpus.domain.clone(),
        split: corpus.split,
        examples,
    })
}

/// Concatenate all corpora whose domain differs from `exclude`, interleaved
/// round-robin over the sources (first example of each source in input
/// order, then the second of each, and so on). Per-example provenance
/// labels are retained; the result carries the `mixed` domain label.
///
/// An `exclude` label matching no corpus is a warning, not an error, as is
/// an empty result.
pub fn mix_corpora(
    corpora: &[Corpus],
    exclude: &str,
) -> Result<(Corpus, Vec<PipelineWarning>), PipelineError> {
    let mut seen = std::collections::BTreeSet::new();
    for c in corpora {
        if !seen.insert(c.domain.as_str()) {
            return Err(PipelineError::DuplicateDomain(c.domain.clone()));
        }
    }
    let sources: Vec<&Corpus> = corpora.iter().filter(|c| c.domain != exclude).collect();
    let mut warnings = Vec::new();
    if sources.len() == corpora.len() {
        warnings.push(PipelineWarning::ExcludeNotFound {
            label: exclude.to_string(),
        });
    }
    let split = match sources.split_first() {
        Some((first, rest)) => {
            for c in rest {
                if c.split != first.split {
                    return Err(PipelineError::MixedSplits {
                        a: first.split,
                        b: c.split,
                    });
                }
            }
            first.split
        }
        None => Split::default(),
    };
    let total: usize = sources.iter().map(|c| c.len()).sum();
    let mut examples = Vec::with_capacity(total);
    let longest = sources.iter().map(|c| c.len()).max().unwrap_or(0);
    for round in 0..longest {
        for source in &sources {
            if let Some(example) = source.examples.get(round) {
                examples.push(example.clone());
            }
        }
    }
    if examples.is_empty() {
        warnings.push(PipelineWarning::EmptyMix);
    }
    let mixed = Corpus {
        domain: MIXED_DOMAIN_LABEL.to_string(),
        split,
        examples,
    };
    Ok((mixed, warnings))
}

/// A file reference inside a manifest: the path as configured plus a
/// SHA-256 digest of its contents, and the corpus domain where relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

/// Stage 1 of the two-stage schedule: domain-agnostic training material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1 {
    pub inputs: Vec<FileRef>,
    pub dictionaries: Vec<FileRef>,
    pub mixed_corpus: FileRef,
}

/// Stage 2: the low-resource target corpus, initialized from stage 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage2 {
    pub target_corpus: FileRef,
    pub init_from: String,
}

/// A complete, digest-pinned description of one two-stage training run.
/// Contains no timestamps: two runs over identical inputs serialize to
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub target_domain: String,
    pub seed: u64,
    pub ratios: Vec<f64>,
    pub stage1: Stage1,
    pub stage2: Stage2,
}

/// Configuration for [`build_manifest`]. Paths are recorded verbatim in
/// the manifest alongside content digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub target_domain: String,
    pub stage1_inputs: Vec<PathBuf>,
    pub dictionaries: Vec<PathBuf>,
    pub mixed_corpus: PathBuf,
    pub target_corpus: PathBuf,
    pub init_from: String,
    pub seed: u64,
    pub ratios: Vec<f64>,
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn file_ref(path: &Path, domain: Option<String>) -> Result<FileRef, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingPath(path.to_path_buf()));
    }
    Ok(FileRef {
        path: path.to_string_lossy().into_owned(),
        sha256: sha256_file(path)?,
        domain,
    })
}

/// Assemble and validate a two-stage training manifest.
///
/// Every referenced file must exist and is pinned by digest. The target
/// domain must be absent from stage 1: neither a stage-1 input corpus nor
/// any example of the mixed corpus may carry the target domain label.
pub fn build_manifest(config: &ManifestConfig) -> Result<PipelineManifest, PipelineError> {
    let mut inputs = Vec::with_capacity(config.stage1_inputs.len());
    for path in &config.stage1_inputs {
        if !path.exists() {
            return Err(PipelineError::MissingPath(path.clone()));
        }
        let corpus = load_corpus(path)?;
        if corpus.domain == config.target_domain {
            return Err(PipelineError::TargetInStage1 {
                path: path.clone(),
                domain: corpus.domain,
            });
        }
        inputs.push(file_ref(path, Some(corpus.domain))?);
    }

    let dictionaries = config
        .dictionaries
        .iter()
        .map(|p| file_ref(p, None))
        .collect::<Result<Vec<_>, _>>()?;

    if !config.mixed_corpus.exists() {
        return Err(PipelineError::MissingPath(config.mixed_corpus.clone()));
    }
    let mixed = load_corpus(&config.mixed_corpus)?;
    let stray = mixed
        .examples
        .iter()
        .filter(|e| e.source_domain.as_deref() == Some(config.target_domain.as_str()))
        .count();
    if stray > 0 {
        return Err(PipelineError::TargetInMix {
            path: config.mixed_corpus.clone(),
            domain: config.target_domain.clone(),
            count: stray,
        });
    }
    let mixed_corpus = file_ref(&config.mixed_corpus, Some(mixed.domain))?;

    if !config.target_corpus.exists() {
        return Err(PipelineError::MissingPath(config.target_corpus.clone()));
    }
    let target = load_corpus(&config.target_corpus)?;
    let target_corpus = file_ref(&config.target_corpus, Some(target.domain))?;

    Ok(PipelineManifest {
        manifest_version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        target_domain: config.target_domain.clone(),
        seed: config.seed,
        ratios: config.ratios.clone(),
        stage1: Stage1 {
            inputs,
            dictionaries,
            mixed_corpus,
        },
        stage2: Stage2 {
            target_corpus,
            init_from: config.init_from.clone(),
        },
    })
}

/// Write a manifest as pretty-printed JSON. Field order is fixed by the
/// type, so identical manifests serialize byte-identically.
pub fn save_manifest(manifest: &PipelineManifest, path: &Path) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let json =
        serde_json::to_string_pretty(manifest).expect("manifest serialization cannot fail");
    w.write_all(json.as_bytes()).map_err(io_err)?;
    w.write_all(b"\n").map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Template-driven generator spec for synthetic multi-domain corpora.
///
/// Each template is one dialogue: segments separated by `|`, the last
/// segment being the response and the preceding ones context turns. Slots
/// are written `{name}` and are filled from the generating domain's
/// lexicon. The first `ceil(shared_fraction * templates.len())` templates
/// are shared by all domains; the remaining private templates are assigned
/// round-robin over the domains in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub templates: Vec<String>,
    /// domain → slot → candidate terms.
    pub lexicons: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub shared_fraction: f64,
}

impl TemplateSpec {
    /// Check the template-set invariants: a usable fraction, at least one domain,
    /// every template well formed (≥ 2 non-blank segments, known slot
    /// syntax), every slot present and non-empty in every domain's
    /// lexicon, and at least one template available to every domain.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::BadTemplateSpec(m));
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return bad(format!(
                "shared_fraction {} outside [0, 1]",
                self.shared_fraction
            ));
        }
        if self.lexicons.is_empty() {
            return bad("no domains defined".into());
        }
        if self.templates.is_empty() {
            return bad("no templates defined".into());
        }
        for (i, template) in self.templates.iter().enumerate() {
            let segments: Vec<&str> = template.split('|').collect();
            if segments.len() < 2 {
                return bad(format!(
                    "template {i} needs at least one context turn and a response \
                     (segments separated by '|')"
                ));
            }
            if segments.iter().any(|s| s.trim().is_empty()) {
                return bad(format!("template {i} has a blank segment"));
            }
            for slot in template_slots(template)? {
                for (domain, lexicon) in &self.lexicons {
                    match lexicon.get(&slot) {
                        None => {
                            return bad(format!(
                                "template {i} uses slot {slot:?} missing from domain \
                                 {domain:?}'s lexicon"
                            ));
                        }
                        Some(terms) if terms.is_empty() => {
                            return bad(format!(
                                "slot {slot:?} of domain {domain:?} has no terms"
                            ));
                        }
                        Some(terms) if terms.iter().any(|t| t.trim().is_empty()) => {
                            return bad(format!(
                                "slot {slot:?} of domain {domain:?} contains a blank term"
                            ));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        let shared = self.shared_count();
        if shared == 0 && self.templates.len() - shared < self.lexicons.len() {
            // round-robin would leave some domain with zero templates
            return bad(format!(
                "{} private templates cannot cover {} domains with no shared templates",
                self.templates.len(),
                self.lexicons.len()
            ));
        }
        Ok(())
    }

    fn shared_count(&self) -> usize {
        (self.shared_fraction * self.templates.len() as f64).ceil() as usize
    }

    /// Template indices available to `domain` (sorted-domain round-robin
    /// for the private tail).
    fn available_templates(&self, domain: &str) -> Vec<usize> {
        let shared = self.shared_count();
        let position = self
            .lexicons
            .keys()
            .position(|d| d == domain)
            .expect("domain is a lexicon key");
        let n_domains = self.lexicons.len();
        let mut available: Vec<usize> = (0..shared).collect();
        available.extend(
            (shared..self.templates.len()).filter(|i| (i - shared) % n_domains == position),
        );
        available
    }

    /// All lexicon terms of one domain as a dictionary, for de-domaining
    /// synthesized text with its generating vocabulary.
    pub fn domain_dictionary(&self, domain: &str) -> Option<DomainDictionary> {
        let lexicon = self.lexicons.get(domain)?;
        let mut dict = DomainDictionary::new(domain);
        let terms = lexicon.values().flatten();
        dict.extend(ingest_terms(terms, Provenance::Manual).entries);
        Some(dict)
    }
}

/// Extract the slot names of a template, left to right, with duplicates.
fn template_slots(template: &str) -> Result<Vec<String>, PipelineError> {
    let mut slots = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| {
            PipelineError::BadTemplateSpec(format!("unclosed '{{' in template {template:?}"))
        })?;
        let name = &after[..close];
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        {
            return Err(PipelineError::BadTemplateSpec(format!(
                "bad slot name {name:?} in template {template:?} \
                 (use lowercase ASCII, digits, underscores)"
            )));
        }
        slots.push(name.to_string());
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(PipelineError::BadTemplateSpec(format!(
            "stray '}}' in template {template:?}"
        )));
    }
    Ok(slots)
}

/// Fill one template's slots from a lexicon, sampling each occurrence
/// independently, and split it into utterance texts.
fn realize_template(
    template: &str,
    lexicon: &BTreeMap<String, Vec<String>>,
    rng: &mut SplitMix64,
) -> Vec<String> {
    template
        .split('|')
        .map(|segment| {
            let mut out = String::new();
            let mut rest = segment;
            while let Some(open) = rest.find('{') {
                out.push_str(&rest[..open]);
                let after = &rest[open + 1..];
                let close = after.find('}').expect("validated template");
                let terms = &lexicon[&after[..close]];
                out.push_str(&terms[rng.next_below(terms.len() as u64) as usize]);
                rest = &after[close + 1..];
            }
            out.push_str(rest);
            out
        })
        .collect()
}

/// Generate one synthetic training corpus per domain (sorted domain
/// order). Each example samples a template uniformly from the domain's
/// available set, then fills each slot occurrence uniformly from the
/// domain's lexicon. Domain `d` draws from the derived stream
/// `SplitMix64::scoped(seed, d)`, so domains never share random state;
/// note the available-template sets still depend on the whole domain list
/// through the private-template round-robin.
pub fn synthesize_corpora(
    spec: &TemplateSpec,
    per_domain_count: usize,
    seed: u64,
) -> Result<Vec<Corpus>, PipelineError> {
    spec.validate()?;
    let mut corpora = Vec::with_capacity(spec.lexicons.len());
    for (domain, lexicon) in &spec.lexicons {
        let available = spec.available_templates(domain);
        let mut rng = SplitMix64::scoped(seed, domain);
        let mut examples = Vec::with_capacity(per_domain_count);
        for _ in 0..per_domain_count {
            let template =
                &spec.templates[available[rng.next_below(available.len() as u64) as usize]];
            let mut texts = realize_template(template, lexicon, &mut rng);
            let response = texts.pop().expect("validated: at least two segments");
            let context = texts
                .iter()
                .map(|t| Utterance::new(t))
                .collect::<Result<Vec<_>, _>>()?;
            let response = Utterance::new(&response)?;
            examples.push(DialogueExample::new(context, response)?);
        }
        corpora.push(Corpus::new(domain, Split::Train, examples)?);
    }
    Ok(corpora)
}

/// Load a [`TemplateSpec`] from a JSON file and validate it.
pub fn load_template_spec(path: &Path) -> Result<TemplateSpec, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: TemplateSpec = serde_json::from_slice(&bytes)
        .map_err(|e| PipelineError::BadTemplateSpec(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}
