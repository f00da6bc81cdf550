//! On-disk store of ingested datasets.
//!
//! ```text
//! <store>/<id>/manifest.json   format version, id, projection settings, input names
//! <store>/<id>/inputs/...      copies of the validated input files
//! <store>/<id>/layout.seml     projected layout
//! <store>/<id>/caches.json     derived tables, keyed by a fingerprint of inputs + layout
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::explain::ClassTermStats;
use crate::geometry::{encode_layout, project, read_layout, write_layout, GeometryError, ProjectedLayout, ProjectionParams, DEFAULT_SEED};
use crate::ingest::{load_corpus, CorpusSources, Dataset, IngestError};
use crate::labels::{available_prototypes, cluster_labels, confusion_table, ConfusionEntry, LabelCluster, LabelPrototype, DEFAULT_CUT};

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid dataset id {0:?}: use letters, digits, '.', '_' or '-'")]
    InvalidId(String),
    #[error("dataset {0:?} already exists")]
    Exists(String),
    #[error("dataset {0:?} not found")]
    NotFound(String),
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

impl StoreError {
    /// Whether the failure is caused by the inputs rather than the system.
    pub fn is_validation(&self) -> bool {
        match self {
            Self::Io { .. } => false,
            Self::Ingest(e) => e.is_validation(),
            _ => true,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Everything needed to build a dataset: id, input files and projection
/// settings. Input paths are relative to the manifest's directory inside a
/// store and as given elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    #[serde(flatten)]
    pub sources: CorpusSources,
    #[serde(default)]
    pub projection: ProjectionParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Manifest {
    pub fn new(id: impl Into<String>, sources: CorpusSources) -> Self {
        Self {
            id: id.into(),
            sources,
            projection: ProjectionParams::default(),
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredManifest {
    format_version: u32,
    #[serde(flatten)]
    manifest: Manifest,
}

pub fn validate_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

/// Derived tables saved next to the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedCaches {
    pub format_version: u32,
    /// SHA-256 over the input files and the layout they were derived from.
    pub fingerprint: String,
    pub confusions: Vec<ConfusionEntry>,
    pub prototypes: Vec<LabelPrototype>,
    pub cluster_cut: f64,
    pub clusters: Vec<LabelCluster>,
    pub terms: ClassTermStats,
}

impl DerivedCaches {
    pub fn compute(dataset: &Dataset, fingerprint: String) -> Self {
        let prototypes = available_prototypes(dataset);
        let clusters = cluster_labels(&prototypes, DEFAULT_CUT).unwrap_or_default();
        Self {
            format_version: STORE_FORMAT_VERSION,
            fingerprint,
            confusions: confusion_table(dataset, None),
            prototypes,
            cluster_cut: DEFAULT_CUT,
            clusters,
            terms: ClassTermStats::build(dataset),
        }
    }
}

/// Hex SHA-256 over each present input file (name, length, bytes) followed
/// by the encoded layout.
pub fn fingerprint(sources: &CorpusSources, layout: &ProjectedLayout) -> Result<String, StoreError> {
    let mut h = Sha256::new();
    let files = [
        ("corpus", Some(&sources.corpus)),
        ("sample_embeddings", sources.sample_embeddings.as_ref()),
        ("token_embeddings", Some(&sources.token_embeddings)),
        ("lexicon", sources.lexicon.as_ref()),
        ("importance", sources.importance.as_ref()),
        ("stopwords", sources.stopwords.as_ref()),
    ];
    for (name, path) in files {
        let Some(path) = path else { continue };
        let bytes = fs::read(path).map_err(io_err(path))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    h.update(encode_layout(layout));
    Ok(hex(&h.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Projects the dataset's sample embeddings with the manifest settings,
/// rounded to the cache file's precision.
pub fn compute_layout(dataset: &Dataset, manifest: &Manifest) -> Result<ProjectedLayout, StoreError> {
    Ok(project(dataset.embeddings().sample_matrix(), &manifest.projection, manifest.seed)?.quantized())
}

/// A dataset as held in a store, with its layout and caches when present.
#[derive(Debug, Clone)]
pub struct StoredDataset {
    pub manifest: Manifest,
    pub dataset: Dataset,
    /// Layout from the cache file, or freshly computed if none matches.
    pub layout: ProjectedLayout,
    pub caches: DerivedCaches,
    /// True when layout and caches both came from disk.
    pub precomputed: bool,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Ids of datasets in the store, sorted.
    pub fn dataset_ids(&self) -> Result<Vec<String>, StoreError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&self.root)(e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_err(&self.root))?;
            if entry.path().join("manifest.json").is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Validates the inputs named by `manifest` and copies them into the
    /// store under the manifest's id.
    pub fn ingest(&self, manifest: &Manifest) -> Result<Dataset, StoreError> {
        validate_id(&manifest.id)?;
        manifest.projection.validate()?;
        let dataset = load_corpus(&manifest.sources)?;
        let dir = self.dataset_dir(&manifest.id);
        if dir.exists() {
            return Err(StoreError::Exists(manifest.id.clone()));
        }
        let inputs = dir.join("inputs");
        fs::create_dir_all(&inputs).map_err(io_err(&inputs))?;

        let copy = |src: &Path, name: &str| -> Result<PathBuf, StoreError> {
            fs::copy(src, inputs.join(name)).map_err(io_err(src))?;
            Ok(Path::new("inputs").join(name))
        };
        let s = &manifest.sources;
        let sources = CorpusSources {
            corpus: copy(&s.corpus, "corpus.jsonl")?,
            sample_embeddings: s.sample_embeddings.as_deref().map(|p| copy(p, "samples.semb")).transpose()?,
            token_embeddings: copy(&s.token_embeddings, "tokens.semt")?,
            lexicon: s.lexicon.as_deref().map(|p| copy(p, "lexicon.jsonl")).transpose()?,
            importance: s.importance.as_deref().map(|p| copy(p, "importance.jsonl")).transpose()?,
            stopwords: s.stopwords.as_deref().map(|p| copy(p, "stopwords.txt")).transpose()?,
        };
        let stored = StoredManifest {
            format_version: STORE_FORMAT_VERSION,
            manifest: Manifest {
                sources,
                ..manifest.clone()
            },
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&stored).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(dataset)
    }

    /// The stored manifest with input paths resolved against the store.
    pub fn manifest(&self, id: &str) -> Result<Manifest, StoreError> {
        validate_id(id)?;
        let dir = self.dataset_dir(id);
        let path = dir.join("manifest.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let stored: StoredManifest = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if stored.format_version != STORE_FORMAT_VERSION {
            return Err(StoreError::Corrupt {
                path,
                message: format!("unsupported store format version {}", stored.format_version),
            });
        }
        let mut m = stored.manifest;
        let resolve = |p: &mut PathBuf| *p = dir.join(&*p);
        resolve(&mut m.sources.corpus);
        resolve(&mut m.sources.token_embeddings);
        for p in [
            &mut m.sources.sample_embeddings,
            &mut m.sources.lexicon,
            &mut m.sources.importance,
            &mut m.sources.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(m)
    }

    /// Computes the layout and derived caches and writes them to the store.
    pub fn precompute(&self, id: &str) -> Result<StoredDataset, StoreError> {
        let manifest = self.manifest(id)?;
        let dataset = load_corpus(&manifest.sources)?;
        let layout = compute_layout(&dataset, &manifest)?;
        let caches = DerivedCaches::compute(&dataset, fingerprint(&manifest.sources, &layout)?);

        let dir = self.dataset_dir(id);
        let layout_path = dir.join("layout.seml");
        write_layout(&layout_path, &layout).map_err(io_err(&layout_path))?;
        let caches_path = dir.join("caches.json");
        let text = serde_json::to_string(&caches).expect("caches serialize");
        fs::write(&caches_path, text).map_err(io_err(&caches_path))?;
        Ok(StoredDataset {
            manifest,
            dataset,
            layout,
            caches,
            precomputed: true,
        })
    }

    /// Loads a dataset, reusing the layout and caches on disk when they
    /// match the inputs and settings, and recomputing them in memory when not.
    pub fn load(&self, id: &str) -> Result<StoredDataset, StoreError> {
        let manifest = self.manifest(id)?;
        let dataset = load_corpus(&manifest.sources)?;
        let dir = self.dataset_dir(id);

        let layout_path = dir.join("layout.seml");
        let cached_layout = if layout_path.is_file() {
            let l = read_layout(&layout_path)?;
            (l.seed == manifest.seed && l.params == manifest.projection && l.len() == dataset.len()).then_some(l)
        } else {
            None
        };
        let from_disk = cached_layout.is_some();
        let layout = match cached_layout {
            Some(l) => l,
            None => compute_layout(&dataset, &manifest)?,
        };
        let print = fingerprint(&manifest.sources, &layout)?;

        let caches_path = dir.join("caches.json");
        let cached: Option<DerivedCaches> = fs::read_to_string(&caches_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .filter(|c: &DerivedCaches| c.format_version == STORE_FORMAT_VERSION && c.fingerprint == print);
        let precomputed = from_disk && cached.is_some();
        let caches = cached.unwrap_or_else(|| DerivedCaches::compute(&dataset, print));
        Ok(StoredDataset {
            manifest,
            dataset,
            layout,
            caches,
            precomputed,
        })
    }
}

/// Builds a dataset directly from a manifest's paths, outside any store.
pub fn load_manifest(manifest: &Manifest) -> Result<StoredDataset, StoreError> {
    validate_id(&manifest.id)?;
    manifest.projection.validate()?;
    let dataset = load_corpus(&manifest.sources)?;
    let layout = compute_layout(&dataset, manifest)?;
    let caches = DerivedCaches::compute(&dataset, fingerprint(&manifest.sources, &layout)?);
    Ok(StoredDataset {
        manifest: manifest.clone(),
        dataset,
        layout,
        caches,
        precomputed: false,
    })
}
