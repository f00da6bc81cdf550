//! Corpus, embedding, lexicon and importance ingestion.
//!
//! Everything is validated up front; a [`Dataset`] that exists is internally
//! consistent and never mutated afterwards.

pub mod binary;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::text::{default_stopwords, normalize_word};

/// Names reserved for the engine's own importance metrics.
pub const BUILTIN_METRICS: [&str; 3] = ["occlusion", "similarity", "ctfidf"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: byte offset {offset}: {message}", path.display())]
    Binary {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{}: non-finite embedding value at byte offset {offset}", path.display())]
    NonFinite { path: PathBuf, offset: u64 },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate sample id {id:?}")]
    DuplicateId { id: String },
    #[error("sample {id:?} has no tokens")]
    EmptyTokens { id: String },
    #[error("sample {id:?}: confidence {value} is outside [0, 1]")]
    Confidence { id: String, value: f64 },
    #[error("sample {id:?}: corpus lists {tokens} tokens but token embeddings store {rows} rows")]
    TokenCountMismatch { id: String, tokens: usize, rows: usize },
    #[error("{what}: expected {expected} samples, found {found}")]
    SampleCountMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite embedding value for sample {id:?}")]
    NonFiniteValue { id: String },
    #[error("importance scores reference unknown sample {id:?}")]
    UnknownSample { id: String },
    #[error("importance metric {metric:?} for sample {id:?}: {message}")]
    Importance {
        id: String,
        metric: String,
        message: String,
    },
}

impl IngestError {
    /// True for input that violates a format or invariant, false for I/O failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, IngestError::Io { .. })
    }
}

/// One classified text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub gold_label: String,
    pub pred_label: String,
    pub confidence: f64,
    #[serde(rename = "domain", default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

impl Sample {
    pub fn is_error(&self) -> bool {
        self.gold_label != self.pred_label
    }
}

/// Sample-level and token-level embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    sample_matrix: Matrix,
    sample_matrix_derived: bool,
    token_matrices: Vec<Matrix>,
}

impl EmbeddingStore {
    /// Builds a store, deriving sample embeddings by mean pooling when absent.
    pub fn new(sample_matrix: Option<Matrix>, token_matrices: Vec<Matrix>) -> Result<Self, IngestError> {
        let dim = match (&sample_matrix, token_matrices.first()) {
            (Some(s), _) => s.cols(),
            (None, Some(t)) => t.cols(),
            (None, None) => return Err(IngestError::EmptyCorpus),
        };
        if dim == 0 {
            return Err(IngestError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for t in &token_matrices {
            if t.cols() != dim {
                return Err(IngestError::DimensionMismatch {
                    expected: dim,
                    found: t.cols(),
                });
            }
        }
        if let Some(s) = &sample_matrix {
            if s.rows() != token_matrices.len() {
                return Err(IngestError::SampleCountMismatch {
                    what: "sample embeddings".into(),
                    expected: token_matrices.len(),
                    found: s.rows(),
                });
            }
        }
        let store = Self {
            dim,
            sample_matrix: sample_matrix.clone().unwrap_or_default(),
            sample_matrix_derived: false,
            token_matrices,
        };
        match sample_matrix {
            Some(_) => Ok(store),
            None => derive_sample_embeddings(store),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_matrix(&self) -> &Matrix {
        &self.sample_matrix
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.sample_matrix.row(i)
    }

    pub fn tokens(&self, i: usize) -> &Matrix {
        &self.token_matrices[i]
    }

    pub fn token_matrices(&self) -> &[Matrix] {
        &self.token_matrices
    }

    /// Whether the sample matrix was mean-pooled from token embeddings.
    pub fn is_derived(&self) -> bool {
        self.sample_matrix_derived
    }

    pub fn len(&self) -> usize {
        self.token_matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_matrices.is_empty()
    }
}

/// Replaces the sample matrix with the mean of each sample's token rows.
pub fn derive_sample_embeddings(mut store: EmbeddingStore) -> Result<EmbeddingStore, IngestError> {
    let mut data = Vec::with_capacity(store.token_matrices.len() * store.dim);
    for (i, t) in store.token_matrices.iter().enumerate() {
        let mean = t.mean_row().ok_or_else(|| IngestError::EmptyTokens {
            id: format!("#{i}"),
        })?;
        data.extend(mean);
    }
    store.sample_matrix = Matrix::from_vec(store.token_matrices.len(), store.dim, data);
    store.sample_matrix_derived = true;
    Ok(store)
}

/// Normalized word → concepts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConceptLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

static NO_CONCEPTS: BTreeSet<String> = BTreeSet::new();

impl ConceptLexicon {
    /// Builds a lexicon, normalizing keys and merging duplicates. Entries
    /// whose key normalizes to nothing or whose concept set is empty are
    /// dropped.
    pub fn from_entries<I, W, C>(entries: I) -> Self
    where
        I: IntoIterator<Item = (W, C)>,
        W: AsRef<str>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (w, cs) in entries {
            let Some(word) = normalize_word(w.as_ref()) else {
                continue;
            };
            let cs: BTreeSet<String> = cs.into_iter().map(Into::into).collect();
            if !cs.is_empty() {
                map.entry(word).or_default().extend(cs);
            }
        }
        Self { entries: map }
    }

    /// Concepts of a normalized word; empty for unknown words.
    pub fn concepts(&self, word: &str) -> &BTreeSet<String> {
        self.entries.get(word).unwrap_or(&NO_CONCEPTS)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.entries.iter()
    }
}

/// Externally computed per-token scores keyed by (sample id, metric).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalImportance {
    scores: BTreeMap<(String, String), Vec<f64>>,
}

impl ExternalImportance {
    pub fn get(&self, id: &str, metric: &str) -> Option<&[f64]> {
        self.scores
            .get(&(id.to_string(), metric.to_string()))
            .map(Vec::as_slice)
    }

    /// Metric names available for one sample, sorted.
    pub fn metrics_for(&self, id: &str) -> Vec<&str> {
        self.scores
            .keys()
            .filter(|(sid, _)| sid == id)
            .map(|(_, m)| m.as_str())
            .collect()
    }

    pub fn insert(&mut self, id: impl Into<String>, metric: impl Into<String>, scores: Vec<f64>) {
        self.scores.insert((id.into(), metric.into()), scores);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &Vec<f64>)> {
        self.scores.iter()
    }
}

/// A validated, immutable corpus with its embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    label_set: Vec<String>,
    embeddings: EmbeddingStore,
    lexicon: ConceptLexicon,
    external_importance: ExternalImportance,
    stopwords: BTreeSet<String>,
    index: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        embeddings: EmbeddingStore,
        lexicon: ConceptLexicon,
        external_importance: ExternalImportance,
        stopwords: BTreeSet<String>,
    ) -> Result<Self, IngestError> {
        if samples.is_empty() {
            return Err(IngestError::EmptyCorpus);
        }
        if embeddings.len() != samples.len() {
            return Err(IngestError::SampleCountMismatch {
                what: "token embeddings".into(),
                expected: samples.len(),
                found: embeddings.len(),
            });
        }
        let mut index = BTreeMap::new();
        let mut labels = BTreeSet::new();
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(IngestError::DuplicateId { id: s.id.clone() });
            }
            validate_sample(s)?;
            let rows = embeddings.tokens(i).rows();
            if rows != s.tokens.len() {
                return Err(IngestError::TokenCountMismatch {
                    id: s.id.clone(),
                    tokens: s.tokens.len(),
                    rows,
                });
            }
            let finite = embeddings.sample(i).iter().all(|v| v.is_finite())
                && embeddings.tokens(i).as_slice().iter().all(|v| v.is_finite());
            if !finite {
                return Err(IngestError::NonFiniteValue { id: s.id.clone() });
            }
            labels.insert(s.gold_label.clone());
            labels.insert(s.pred_label.clone());
        }
        for ((id, metric), scores) in external_importance.iter() {
            let Some(&i) = index.get(id) else {
                return Err(IngestError::UnknownSample { id: id.clone() });
            };
            check_importance(id, metric, scores, samples[i].tokens.len())?;
        }
        Ok(Self {
            samples,
            label_set: labels.into_iter().collect(),
            embeddings,
            lexicon,
            external_importance,
            stopwords,
            index,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct gold and predicted labels, sorted.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn embeddings(&self) -> &EmbeddingStore {
        &self.embeddings
    }

    pub fn lexicon(&self) -> &ConceptLexicon {
        &self.lexicon
    }

    pub fn external_importance(&self) -> &ExternalImportance {
        &self.external_importance
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Normalized words of sample `i`, one per token that survives normalization.
    pub fn words(&self, i: usize) -> impl Iterator<Item = String> + '_ {
        self.samples[i].tokens.iter().filter_map(|t| normalize_word(t))
    }

    /// Writes the dataset as input files under `dir` and returns their paths.
    ///
    /// The sample embedding file is only written when the sample matrix was
    /// supplied rather than derived, so reloading reproduces the dataset.
    pub fn export(&self, dir: &Path) -> Result<CorpusSources, io::Error> {
        fs::create_dir_all(dir)?;
        let sources = CorpusSources {
            corpus: dir.join("corpus.jsonl"),
            sample_embeddings: (!self.embeddings.is_derived()).then(|| dir.join("samples.semb")),
            token_embeddings: dir.join("tokens.semt"),
            lexicon: Some(dir.join("lexicon.jsonl")),
            importance: Some(dir.join("importance.jsonl")),
            stopwords: Some(dir.join("stopwords.txt")),
        };

        let mut w = BufWriter::new(fs::File::create(&sources.corpus)?);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        if let Some(p) = &sources.sample_embeddings {
            binary::write_sample_embeddings(p, self.embeddings.sample_matrix())?;
        }
        binary::write_token_embeddings(
            &sources.token_embeddings,
            self.embeddings.dim(),
            self.embeddings.token_matrices(),
        )?;

        let mut w = BufWriter::new(fs::File::create(sources.lexicon.as_ref().unwrap())?);
        for (word, concepts) in self.lexicon.iter() {
            let rec = LexiconRecord {
                word: word.clone(),
                concepts: concepts.iter().cloned().collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(sources.importance.as_ref().unwrap())?);
        for ((id, metric), scores) in self.external_importance.iter() {
            let rec = ImportanceRecord {
                id: id.clone(),
                metric: metric.clone(),
                scores: scores.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(sources.stopwords.as_ref().unwrap())?);
        for word in &self.stopwords {
            writeln!(w, "{word}")?;
        }
        w.flush()?;
        Ok(sources)
    }
}

fn validate_sample(s: &Sample) -> Result<(), IngestError> {
    if s.tokens.is_empty() {
        return Err(IngestError::EmptyTokens { id: s.id.clone() });
    }
    if !(0.0..=1.0).contains(&s.confidence) {
        return Err(IngestError::Confidence {
            id: s.id.clone(),
            value: s.confidence,
        });
    }
    Ok(())
}

fn check_importance(id: &str, metric: &str, scores: &[f64], tokens: usize) -> Result<(), IngestError> {
    let fail = |message: String| IngestError::Importance {
        id: id.to_string(),
        metric: metric.to_string(),
        message,
    };
    if BUILTIN_METRICS.contains(&metric) {
        return Err(fail("name is reserved for a built-in metric".into()));
    }
    if scores.len() != tokens {
        return Err(fail(format!("{} scores for {tokens} tokens", scores.len())));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite score".into()));
    }
    Ok(())
}

/// Paths of the files making up one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSources {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_embeddings: Option<PathBuf>,
    pub token_embeddings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconRecord {
    word: String,
    concepts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportanceRecord {
    id: String,
    metric: String,
    scores: Vec<f64>,
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses non-blank JSON lines, tagging failures with their 1-based line.
fn parse_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, IngestError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| IngestError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Sample>, IngestError> {
    let records: Vec<(usize, Sample)> = parse_jsonl(path)?;
    let mut seen = BTreeSet::new();
    let mut samples = Vec::with_capacity(records.len());
    for (line, s) in records {
        let fail = |message: String| IngestError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        if !seen.insert(s.id.clone()) {
            return Err(fail(format!("duplicate sample id {:?}", s.id)));
        }
        validate_sample(&s).map_err(|e| fail(e.to_string()))?;
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    Ok(samples)
}

pub fn read_lexicon(path: &Path) -> Result<ConceptLexicon, IngestError> {
    let records: Vec<(usize, LexiconRecord)> = parse_jsonl(path)?;
    let mut entries = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let fail = |message: &str| IngestError::Format {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        if normalize_word(&rec.word).is_none() {
            return Err(fail("word normalizes to nothing"));
        }
        if rec.concepts.is_empty() {
            return Err(fail("concept list is empty"));
        }
        entries.push((rec.word, rec.concepts));
    }
    Ok(ConceptLexicon::from_entries(entries))
}

pub fn read_importance(path: &Path) -> Result<ExternalImportance, IngestError> {
    let records: Vec<(usize, ImportanceRecord)> = parse_jsonl(path)?;
    let mut out = ExternalImportance::default();
    for (line, rec) in records {
        if out.get(&rec.id, &rec.metric).is_some() {
            return Err(IngestError::Format {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate scores for ({:?}, {:?})", rec.id, rec.metric),
            });
        }
        out.insert(rec.id, rec.metric, rec.scores);
    }
    Ok(out)
}

/// Reads a stopword file: one word per line, `#` starts a comment.
pub fn read_stopwords(path: &Path) -> Result<BTreeSet<String>, IngestError> {
    let text = read_text(path)?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect())
}

/// Loads and validates a dataset from its input files.
pub fn load_corpus(sources: &CorpusSources) -> Result<Dataset, IngestError> {
    let samples = read_corpus(&sources.corpus)?;
    let (dim, tokens) = binary::read_token_embeddings(&sources.token_embeddings)?;
    if tokens.len() != samples.len() {
        return Err(IngestError::SampleCountMismatch {
            what: format!("token embeddings {}", sources.token_embeddings.display()),
            expected: samples.len(),
            found: tokens.len(),
        });
    }
    for (s, t) in samples.iter().zip(&tokens) {
        if s.tokens.len() != t.rows() {
            return Err(IngestError::TokenCountMismatch {
                id: s.id.clone(),
                tokens: s.tokens.len(),
                rows: t.rows(),
            });
        }
    }
    let sample_matrix = match &sources.sample_embeddings {
        Some(p) => {
            let m = binary::read_sample_embeddings(p)?;
            if m.rows() != samples.len() {
                return Err(IngestError::SampleCountMismatch {
                    what: format!("sample embeddings {}", p.display()),
                    expected: samples.len(),
                    found: m.rows(),
                });
            }
            if m.cols() != dim {
                return Err(IngestError::DimensionMismatch {
                    expected: dim,
                    found: m.cols(),
                });
            }
            Some(m)
        }
        None => None,
    };
    let embeddings = EmbeddingStore::new(sample_matrix, tokens)?;
    let lexicon = match &sources.lexicon {
        Some(p) => read_lexicon(p)?,
        None => ConceptLexicon::default(),
    };
    let importance = match &sources.importance {
        Some(p) => read_importance(p)?,
        None => ExternalImportance::default(),
    };
    let stopwords = match &sources.stopwords {
        Some(p) => read_stopwords(p)?,
        None => default_stopwords(),
    };
    Dataset::new(samples, embeddings, lexicon, importance, stopwords)
}
