//! In-memory registry of loaded datasets shared by all readers.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::explain::ExplainCaches;
use crate::geometry::ProjectedLayout;
use crate::ingest::Dataset;
use crate::labels::{LabelCluster, LabelPrototype};
use crate::store::{hex, Manifest, StoredDataset};

/// A dataset with everything precomputed for queries. Immutable once built.
#[derive(Debug)]
pub struct LoadedDataset {
    pub id: String,
    pub manifest: Manifest,
    pub dataset: Dataset,
    pub layout: ProjectedLayout,
    /// `<id>/<first 8 hex digits of the layout fingerprint>`.
    pub layout_id: String,
    pub explain: ExplainCaches,
    pub prototypes: Vec<LabelPrototype>,
    pub cluster_cut: f64,
    pub clusters: Vec<LabelCluster>,
}

impl LoadedDataset {
    pub fn new(stored: StoredDataset) -> Self {
        let StoredDataset {
            manifest,
            dataset,
            layout,
            caches,
            ..
        } = stored;
        let short = caches.fingerprint.get(..8).map(str::to_string).unwrap_or_else(|| hex(&[0; 4]));
        Self {
            id: manifest.id.clone(),
            layout_id: format!("{}/{short}", manifest.id),
            explain: ExplainCaches {
                prototypes: caches
                    .prototypes
                    .iter()
                    .map(|p| (p.label.clone(), p.vector.clone()))
                    .collect(),
                terms: caches.terms,
                confusions: caches.confusions,
            },
            prototypes: caches.prototypes,
            cluster_cut: caches.cluster_cut,
            clusters: caches.clusters,
            manifest,
            dataset,
            layout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlreadyLoaded(pub String);

/// Datasets by id. Readers never block each other; inserts take the write
/// lock only to publish a fully built entry.
#[derive(Debug, Default)]
pub struct Registry {
    entries: RwLock<BTreeMap<String, Arc<LoadedDataset>>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<Arc<LoadedDataset>> {
        self.entries.read().expect("registry lock").get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.read().expect("registry lock").contains_key(id)
    }

    /// All entries in id order.
    pub fn list(&self) -> Vec<Arc<LoadedDataset>> {
        self.entries.read().expect("registry lock").values().cloned().collect()
    }

    pub fn insert(&self, entry: LoadedDataset) -> Result<Arc<LoadedDataset>, AlreadyLoaded> {
        let mut entries = self.entries.write().expect("registry lock");
        if entries.contains_key(&entry.id) {
            return Err(AlreadyLoaded(entry.id));
        }
        let entry = Arc::new(entry);
        entries.insert(entry.id.clone(), Arc::clone(&entry));
        Ok(entry)
    }
}
