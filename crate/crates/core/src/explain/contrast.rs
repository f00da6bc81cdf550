use std::collections::BTreeMap;

use serde::Serialize;

use super::{ExplainCaches, ExplainError};
use crate::ingest::Dataset;
use crate::matrix::cosine;

/// A query sample, its nearest neighbor sharing the predicted label, and
/// the nearest example of a contrasting label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContrastTriple {
    pub query_id: String,
    pub query_pred_label: String,
    pub query_gold_label: String,
    pub closest_id: String,
    pub contrast_id: String,
    pub contrast_label: String,
}

/// Index of the sample most cosine-similar to `query` among `candidates`;
/// ties go to the smaller sample id.
fn nearest(dataset: &Dataset, query: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let q = dataset.embeddings().sample(query);
    let mut best: Option<(f64, usize)> = None;
    for j in candidates {
        let sim = cosine(q, dataset.embeddings().sample(j));
        let better = match best {
            None => true,
            Some((bs, bj)) => sim > bs || (sim == bs && dataset.sample(j).id < dataset.sample(bj).id),
        };
        if better {
            best = Some((sim, j));
        }
    }
    best.map(|(_, j)| j)
}

fn gold_candidates<'a>(dataset: &'a Dataset, query: usize, label: &'a str) -> impl Iterator<Item = usize> + 'a {
    (0..dataset.len()).filter(move |&j| j != query && dataset.sample(j).gold_label == label)
}

/// Picks the contrast label when none is given: the gold label for a
/// misclassified query, else the label most often confused with the
/// prediction, else the gold label of the nearest differently labelled
/// sample. Labels without any other gold sample are skipped.
fn default_contrast_label(dataset: &Dataset, caches: &ExplainCaches, query: usize) -> Option<String> {
    let s = dataset.sample(query);
    let usable = |label: &str| label != s.pred_label && gold_candidates(dataset, query, label).next().is_some();
    if s.is_error() && usable(&s.gold_label) {
        return Some(s.gold_label.clone());
    }
    let mut confused: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &caches.confusions {
        let other = if e.pred == s.pred_label {
            &e.gold
        } else if e.gold == s.pred_label {
            &e.pred
        } else {
            continue;
        };
        *confused.entry(other).or_default() += e.frequency;
    }
    let mut ranked: Vec<(&str, usize)> = confused.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some((label, _)) = ranked.into_iter().find(|(l, _)| usable(l)) {
        return Some(label.to_string());
    }
    let other = (0..dataset.len()).filter(|&j| j != query && dataset.sample(j).gold_label != s.pred_label);
    nearest(dataset, query, other).map(|j| dataset.sample(j).gold_label.clone())
}

pub fn select_contrast(
    dataset: &Dataset,
    caches: &ExplainCaches,
    query_id: &str,
    contrast_label: Option<&str>,
) -> Result<ContrastTriple, ExplainError> {
    let query = dataset
        .index_of(query_id)
        .ok_or_else(|| ExplainError::UnknownSample(query_id.to_string()))?;
    let s = dataset.sample(query);

    let same_pred = (0..dataset.len()).filter(|&j| j != query && dataset.sample(j).pred_label == s.pred_label);
    let closest = nearest(dataset, query, same_pred).ok_or(ExplainError::NoCandidate("closest"))?;

    let label = match contrast_label {
        Some(l) => {
            if dataset.label_set().binary_search_by(|x| x.as_str().cmp(l)).is_err() {
                return Err(ExplainError::UnknownLabel(l.to_string()));
            }
            if l == s.pred_label {
                return Err(ExplainError::ContrastIsPrediction(l.to_string()));
            }
            l.to_string()
        }
        None => default_contrast_label(dataset, caches, query).ok_or(ExplainError::NoCandidate("contrast"))?,
    };
    let contrast =
        nearest(dataset, query, gold_candidates(dataset, query, &label)).ok_or(ExplainError::NoCandidate("contrast"))?;

    Ok(ContrastTriple {
        query_id: s.id.clone(),
        query_pred_label: s.pred_label.clone(),
        query_gold_label: s.gold_label.clone(),
        closest_id: dataset.sample(closest).id.clone(),
        contrast_id: dataset.sample(contrast).id.clone(),
        contrast_label: label,
    })
}
