//! Localized word clouds.
//!
//! Every normalized token of every sample in scope adds one occurrence at
//! that sample's position. A word is *local* when it occurs more than `T`
//! times and its occurrences are concentrated: the `q`-quantile of their
//! distances from their geometric median, divided by the same statistic
//! over all samples in scope, is at most `λ`. Local words are placed at the
//! geometric median of their occurrences. Running the same filter over
//! concepts attached to the local words gives localized concepts.
//!
//! No clustering is involved; positions may live in any number of
//! dimensions.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{geometric_median, ProjectedLayout, RegionSelector};
use crate::ingest::{ConceptLexicon, Dataset};
use crate::matrix::distance;
use crate::num;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LwcError {
    #[error("invalid local-word parameter: {0}")]
    InvalidParams(String),
    #[error("layout has {layout} points but the dataset has {samples} samples")]
    LayoutMismatch { layout: usize, samples: usize },
}

/// Which coordinates occurrences are placed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// The 2-D projected layout.
    #[default]
    Layout,
    /// The original sample embedding space.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwcParams {
    /// Words need strictly more than this many occurrences.
    pub freq_threshold: usize,
    /// Largest accepted normalized locality.
    pub locality_max: f64,
    pub ignore_stopwords: bool,
    pub locality_quantile: f64,
}

impl Default for LwcParams {
    fn default() -> Self {
        Self {
            freq_threshold: 20,
            locality_max: 0.5,
            ignore_stopwords: false,
            locality_quantile: 0.8,
        }
    }
}

impl LwcParams {
    pub fn validate(&self) -> Result<(), LwcError> {
        if !(self.locality_max > 0.0 && self.locality_max.is_finite()) {
            return Err(LwcError::InvalidParams("locality must be positive and finite".into()));
        }
        if !(self.locality_quantile > 0.0 && self.locality_quantile <= 1.0) {
            return Err(LwcError::InvalidParams("quantile must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A word (or concept) localized in the space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWord {
    pub word: String,
    #[serde(serialize_with = "num::sig9_vec")]
    pub position: Vec<f64>,
    pub frequency: usize,
    #[serde(serialize_with = "num::sig9")]
    pub locality: f64,
    /// `ln(1 + frequency)`, for sizing the word in an overlay.
    #[serde(serialize_with = "num::sig9")]
    pub scale_hint: f64,
}

/// Occurrence positions per word, plus the positions of every sample in
/// scope (which fix the normalization scale).
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceIndex {
    dim: usize,
    words: BTreeMap<String, Vec<f64>>,
    /// Distances of in-scope samples from their geometric median, ascending.
    scope_distances: Vec<f64>,
    stopwords: BTreeSet<String>,
}

impl OccurrenceIndex {
    /// Builds an index from `(sample position, words of that sample)` pairs.
    pub fn from_samples<I, W>(dim: usize, samples: I, stopwords: BTreeSet<String>) -> Self
    where
        I: IntoIterator<Item = (Vec<f64>, W)>,
        W: IntoIterator<Item = String>,
    {
        let mut words: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut scope = Vec::new();
        for (pos, ws) in samples {
            assert_eq!(pos.len(), dim, "position dimension");
            for w in ws {
                words.entry(w).or_default().extend_from_slice(&pos);
            }
            scope.push(pos);
        }
        let scope_distances = if scope.is_empty() {
            Vec::new()
        } else {
            let center = geometric_median(&scope);
            let mut d: Vec<f64> = scope.iter().map(|p| distance(p, &center)).collect();
            d.sort_by(f64::total_cmp);
            d
        };
        Self {
            dim,
            words,
            scope_distances,
            stopwords,
        }
    }

    fn with_words(&self, words: BTreeMap<String, Vec<f64>>) -> Self {
        Self {
            dim: self.dim,
            words,
            scope_distances: self.scope_distances.clone(),
            stopwords: self.stopwords.clone(),
        }
    }

    pub fn space_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn frequency(&self, word: &str) -> usize {
        self.words.get(word).map_or(0, |v| v.len() / self.dim.max(1))
    }

    pub fn total_occurrences(&self) -> usize {
        self.words.values().map(|v| v.len() / self.dim.max(1)).sum()
    }

    /// Occurrence positions of `word` (empty if absent).
    pub fn occurrences(&self, word: &str) -> Vec<&[f64]> {
        self.words
            .get(word)
            .map(|v| v.chunks_exact(self.dim).collect())
            .unwrap_or_default()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.keys().map(String::as_str)
    }

    /// The `q`-quantile of in-scope sample distances from their geometric
    /// median. Falls back to 1 when every sample sits at one point.
    pub fn global_scale(&self, quantile: f64) -> f64 {
        let s = quantile_sorted(&self.scope_distances, quantile);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Collects occurrences of every normalized token of the in-region samples.
///
/// Region membership is always decided in the 2-D layout; `space` picks the
/// coordinates the occurrences are recorded at. Stopwords stay in the index.
pub fn build_index(
    dataset: &Dataset,
    layout: &ProjectedLayout,
    region: Option<&RegionSelector>,
    space: Space,
) -> Result<OccurrenceIndex, LwcError> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    build_index_for(dataset, layout, &all, region, space)
}

/// Like [`build_index`], restricted to the given sample indices.
pub fn build_index_for(
    dataset: &Dataset,
    layout: &ProjectedLayout,
    samples: &[usize],
    region: Option<&RegionSelector>,
    space: Space,
) -> Result<OccurrenceIndex, LwcError> {
    if layout.len() != dataset.len() {
        return Err(LwcError::LayoutMismatch {
            layout: layout.len(),
            samples: dataset.len(),
        });
    }
    let dim = match space {
        Space::Layout => 2,
        Space::Embedding => dataset.embeddings().dim(),
    };
    let in_scope = samples
        .iter()
        .copied()
        .filter(|&i| region.is_none_or(|r| r.contains(layout.positions[i])));
    let rows = in_scope.map(|i| {
        let pos = match space {
            Space::Layout => layout.positions[i].to_vec(),
            Space::Embedding => dataset.embeddings().sample(i).to_vec(),
        };
        (pos, dataset.words(i).collect::<Vec<_>>())
    });
    Ok(OccurrenceIndex::from_samples(dim, rows, dataset.stopwords().clone()))
}

/// Normalized spread of a set of occurrences: the `quantile` of their
/// distances from their geometric median, divided by `global_scale`.
pub fn locality_score<P: AsRef<[f64]>>(occurrences: &[P], global_scale: f64, quantile: f64) -> f64 {
    locality_and_center(occurrences, global_scale, quantile).0
}

fn locality_and_center<P: AsRef<[f64]>>(occurrences: &[P], global_scale: f64, quantile: f64) -> (f64, Vec<f64>) {
    let center = geometric_median(occurrences);
    let mut d: Vec<f64> = occurrences.iter().map(|p| distance(p.as_ref(), &center)).collect();
    d.sort_by(f64::total_cmp);
    (quantile_sorted(&d, quantile) / global_scale, center)
}

/// Words with frequency above `T` and locality at most `λ`, sorted by
/// frequency (descending) then word.
pub fn local_words(index: &OccurrenceIndex, params: &LwcParams) -> Result<Vec<LocalWord>, LwcError> {
    params.validate()?;
    let scale = index.global_scale(params.locality_quantile);
    let candidates: Vec<(&String, &Vec<f64>)> = index
        .words
        .iter()
        .filter(|(w, occ)| {
            occ.len() / index.dim > params.freq_threshold
                && !(params.ignore_stopwords && index.stopwords.contains(*w))
        })
        .collect();
    let mut out: Vec<LocalWord> = candidates
        .par_iter()
        .filter_map(|(word, flat)| {
            let occ: Vec<&[f64]> = flat.chunks_exact(index.dim).collect();
            let (locality, center) = locality_and_center(&occ, scale, params.locality_quantile);
            (locality <= params.locality_max).then(|| LocalWord {
                word: (*word).clone(),
                position: center,
                frequency: occ.len(),
                locality,
                scale_hint: (1.0 + occ.len() as f64).ln(),
            })
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}

/// Two-stage variant: local words are found with `params`, each of their
/// occurrences becomes an occurrence of every concept the lexicon assigns
/// to the word, and the filter runs again over concepts with
/// `concept_params`.
pub fn local_concepts(
    index: &OccurrenceIndex,
    lexicon: &ConceptLexicon,
    params: &LwcParams,
    concept_params: &LwcParams,
) -> Result<Vec<LocalWord>, LwcError> {
    concept_params.validate()?;
    let words = local_words(index, params)?;
    let mut concepts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for lw in &words {
        let occ = &index.words[&lw.word];
        for c in lexicon.concepts(&lw.word) {
            concepts.entry(c.clone()).or_default().extend_from_slice(occ);
        }
    }
    local_words(&index.with_words(concepts), concept_params)
}
