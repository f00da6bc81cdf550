//! Sample-level explanations: per-token importance under several metrics,
//! neighbor and contrast selection, token relation graphs and a templated
//! summary.

mod contrast;
mod graph;
mod summary;
mod vifi;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ingest::Dataset;
use crate::labels::{available_prototypes, confusion_table, ConfusionEntry};

pub use contrast::{select_contrast, ContrastTriple};
pub use graph::{pair_contributions, relation_graph, ColumnHeader, PairContributions, RelationEdge, RelationGraph, DEFAULT_TAU};
pub use summary::{summarize, Summary, SummarySlots};
pub use vifi::{
    occlusion_scores, normalize_scores, similarity_scores, vifi, ClassTermStats, ImportanceProfile, MetricScores,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("unknown sample {0:?}")]
    UnknownSample(String),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label {0:?} has no gold samples to form a prototype")]
    NoPrototype(String),
    #[error("no candidate for the {0} sample")]
    NoCandidate(&'static str),
    #[error("contrast label {0:?} equals the predicted label")]
    ContrastIsPrediction(String),
    #[error("pooled embedding of sample {0:?} has zero norm")]
    ZeroNorm(String),
    #[error("tau must be a finite value in [-1, 1], got {0}")]
    InvalidTau(f64),
}

/// Corpus-level data every explanation draws on, computed once per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainCaches {
    pub prototypes: BTreeMap<String, Vec<f64>>,
    pub terms: ClassTermStats,
    pub confusions: Vec<ConfusionEntry>,
}

impl ExplainCaches {
    pub fn build(dataset: &Dataset) -> Self {
        Self {
            prototypes: available_prototypes(dataset)
                .into_iter()
                .map(|p| (p.label, p.vector))
                .collect(),
            terms: ClassTermStats::build(dataset),
            confusions: confusion_table(dataset, None),
        }
    }
}
