//! Label-level analytics: confusion table, error shares, label prototypes,
//! label clustering and sample filters.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::matrix::cosine;
use crate::num;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("label {0:?} has no gold samples")]
    EmptyLabel(String),
    #[error("confidence band [{lo}, {hi}] is empty")]
    InvertedBand { lo: f64, hi: f64 },
    #[error("cluster cut must be in (0, 2), got {0}")]
    InvalidCut(f64),
    #[error("no prototypes to cluster")]
    NoPrototypes,
}

/// Inclusive confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub lo: f64,
    pub hi: f64,
}

impl ConfidenceBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self, LabelError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(LabelError::InvertedBand { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.lo && c <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub gold: String,
    pub pred: String,
    pub frequency: usize,
    pub sample_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfusionSort {
    /// Descending frequency.
    Freq,
    Gold,
    Pred,
}

impl ConfusionSort {
    fn compare(self, a: &ConfusionEntry, b: &ConfusionEntry) -> Ordering {
        match self {
            Self::Freq => b.frequency.cmp(&a.frequency),
            Self::Gold => a.gold.cmp(&b.gold),
            Self::Pred => a.pred.cmp(&b.pred),
        }
    }
}

/// One entry per (gold, pred) error pair among samples in `band`, sorted by
/// frequency with ties broken by (gold, pred).
pub fn confusion_table(dataset: &Dataset, band: Option<ConfidenceBand>) -> Vec<ConfusionEntry> {
    let mut pairs: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
    for s in dataset.samples() {
        if s.is_error() && band.is_none_or(|b| b.contains(s.confidence)) {
            pairs
                .entry((&s.gold_label, &s.pred_label))
                .or_default()
                .push(s.id.clone());
        }
    }
    let mut table: Vec<ConfusionEntry> = pairs
        .into_iter()
        .map(|((gold, pred), mut sample_ids)| {
            sample_ids.sort();
            ConfusionEntry {
                gold: gold.to_string(),
                pred: pred.to_string(),
                frequency: sample_ids.len(),
                sample_ids,
            }
        })
        .collect();
    sort_confusions(&mut table, ConfusionSort::Freq, None);
    table
}

/// Sorts by `primary`, then `secondary` within equal primary keys, then by
/// (gold, pred). The result is a total order, so repeated sorts are stable.
pub fn sort_confusions(table: &mut [ConfusionEntry], primary: ConfusionSort, secondary: Option<ConfusionSort>) {
    table.sort_by(|a, b| {
        primary
            .compare(a, b)
            .then_with(|| secondary.map_or(Ordering::Equal, |s| s.compare(a, b)))
            .then_with(|| a.gold.cmp(&b.gold))
            .then_with(|| a.pred.cmp(&b.pred))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelShare {
    pub label: String,
    pub count: usize,
    #[serde(serialize_with = "num::sig9")]
    pub share: f64,
}

/// How errors distribute over labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorShares {
    pub total_errors: usize,
    /// Share of all false negatives per gold label.
    pub false_negatives: Vec<LabelShare>,
    /// Share of all false positives per predicted label.
    pub false_positives: Vec<LabelShare>,
}

impl ErrorShares {
    /// True when the corpus has no errors and the distributions are undefined.
    pub fn is_empty(&self) -> bool {
        self.total_errors == 0
    }
}

/// Ranks labels by `count` (descending, then label) and attaches shares.
pub fn ranked_shares(counts: BTreeMap<String, usize>) -> Vec<LabelShare> {
    let total: usize = counts.values().sum();
    let mut out: Vec<LabelShare> = counts
        .into_iter()
        .filter(|(_, c)| *c > 0)
        .map(|(label, count)| LabelShare {
            label,
            count,
            share: count as f64 / total as f64,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
    out
}

pub fn error_shares(dataset: &Dataset) -> ErrorShares {
    let mut fnc: BTreeMap<String, usize> = BTreeMap::new();
    let mut fpc: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    for s in dataset.samples().iter().filter(|s| s.is_error()) {
        total += 1;
        *fnc.entry(s.gold_label.clone()).or_default() += 1;
        *fpc.entry(s.pred_label.clone()).or_default() += 1;
    }
    ErrorShares {
        total_errors: total,
        false_negatives: ranked_shares(fnc),
        false_positives: ranked_shares(fpc),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPrototype {
    pub label: String,
    pub vector: Vec<f64>,
    pub support: usize,
}

/// Mean sample embedding per gold label, for labels that have gold samples.
pub fn available_prototypes(dataset: &Dataset) -> Vec<LabelPrototype> {
    let dim = dataset.embeddings().dim();
    let mut acc: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (i, s) in dataset.samples().iter().enumerate() {
        let (sum, n) = acc.entry(&s.gold_label).or_insert_with(|| (vec![0.0; dim], 0));
        for (a, v) in sum.iter_mut().zip(dataset.embeddings().sample(i)) {
            *a += v;
        }
        *n += 1;
    }
    acc.into_iter()
        .map(|(label, (mut sum, n))| {
            sum.iter_mut().for_each(|v| *v /= n as f64);
            LabelPrototype {
                label: label.to_string(),
                vector: sum,
                support: n,
            }
        })
        .collect()
}

/// Prototypes for every label in the label set; fails if any label never
/// occurs as a gold label.
pub fn label_prototypes(dataset: &Dataset) -> Result<Vec<LabelPrototype>, LabelError> {
    let protos = available_prototypes(dataset);
    for (label, p) in dataset.label_set().iter().zip(&protos) {
        if *label != p.label {
            return Err(LabelError::EmptyLabel(label.clone()));
        }
    }
    if let Some(missing) = dataset.label_set().get(protos.len()) {
        return Err(LabelError::EmptyLabel(missing.clone()));
    }
    Ok(protos)
}

pub const DEFAULT_CUT: f64 = 0.5;

/// Colors that cluster indices cycle through.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCluster {
    pub id: usize,
    pub members: Vec<String>,
    pub color_index: usize,
    pub color: String,
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.iter().all(|v| *v == 0.0) || b.iter().all(|v| *v == 0.0) {
        return 1.0;
    }
    1.0 - cosine(a, b)
}

/// Average-linkage agglomerative clustering on cosine distance.
///
/// Clusters merge while the smallest linkage is below `cut`; equal
/// linkages are resolved by the smallest member labels of the two clusters.
/// Clusters come out ordered by their smallest member, and that order is
/// the `color_index`.
pub fn cluster_labels(prototypes: &[LabelPrototype], cut: f64) -> Result<Vec<LabelCluster>, LabelError> {
    if !(cut > 0.0 && cut < 2.0) {
        return Err(LabelError::InvalidCut(cut));
    }
    if prototypes.is_empty() {
        return Err(LabelError::NoPrototypes);
    }
    let mut protos: Vec<&LabelPrototype> = prototypes.iter().collect();
    protos.sort_by(|a, b| a.label.cmp(&b.label));
    let n = protos.len();

    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&protos[i].vector, &protos[j].vector);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    // clusters[k] = member indices into `protos`, sorted; index order = label order
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            let Some(ca) = &clusters[a] else { continue };
            for b in (a + 1)..n {
                let Some(cb) = &clusters[b] else { continue };
                let d = dist[a][b];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        d < bd || (d == bd && tie_key(ca, cb) < tie_key(
                            clusters[ba].as_ref().unwrap(),
                            clusters[bb].as_ref().unwrap(),
                        ))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((d, a, b)) = best else { break };
        if d >= cut {
            break;
        }
        let cb = clusters[b].take().unwrap();
        let ca = clusters[a].as_mut().unwrap();
        let (na, nb) = (ca.len() as f64, cb.len() as f64);
        ca.extend(cb);
        ca.sort_unstable();
        for k in 0..n {
            if k != a && clusters[k].is_some() {
                let merged = (na * dist[a][k] + nb * dist[b][k]) / (na + nb);
                dist[a][k] = merged;
                dist[k][a] = merged;
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = clusters.into_iter().flatten().collect();
    groups.sort_by_key(|g| g[0]);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(id, g)| LabelCluster {
            id,
            members: g.iter().map(|&i| protos[i].label.clone()).collect(),
            color_index: id,
            color: PALETTE[id % PALETTE.len()].to_string(),
        })
        .collect())
}

/// Member indices are label ranks, so comparing them compares labels.
fn tie_key(a: &[usize], b: &[usize]) -> (usize, usize) {
    (a[0].min(b[0]), a[0].max(b[0]))
}

/// Which label fields a label filter inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelField {
    Gold,
    Pred,
    /// Gold or predicted.
    #[default]
    Either,
}

/// Indices (ascending) of samples satisfying every given predicate.
pub fn filter_samples(
    dataset: &Dataset,
    errors_only: bool,
    confidence: Option<ConfidenceBand>,
    labels: Option<&BTreeSet<String>>,
) -> Vec<usize> {
    filter_samples_by(dataset, errors_only, confidence, labels, LabelField::Either)
}

pub fn filter_samples_by(
    dataset: &Dataset,
    errors_only: bool,
    confidence: Option<ConfidenceBand>,
    labels: Option<&BTreeSet<String>>,
    field: LabelField,
) -> Vec<usize> {
    dataset
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| !errors_only || s.is_error())
        .filter(|(_, s)| confidence.is_none_or(|b| b.contains(s.confidence)))
        .filter(|(_, s)| {
            labels.is_none_or(|ls| match field {
                LabelField::Gold => ls.contains(&s.gold_label),
                LabelField::Pred => ls.contains(&s.pred_label),
                LabelField::Either => ls.contains(&s.gold_label) || ls.contains(&s.pred_label),
            })
        })
        .map(|(i, _)| i)
        .collect()
}
