//! Two-group comparison: group selectors and weighted log-odds with an
//! informative Dirichlet prior over words, concepts or labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{select_region, ProjectedLayout, RegionSelector};
use crate::ingest::Dataset;
use crate::labels::ConfidenceBand;
use crate::num;

/// Total prior mass.
pub const PRIOR_MASS: f64 = 500.0;
/// Two-sided 95% critical value.
pub const Z_CRIT: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("group {0} selects no samples")]
    EmptyGroup(&'static str),
    #[error("invalid group selector: {0}")]
    InvalidSelector(String),
}

/// Conjunction of sample predicates. Absent fields do not filter, so the
/// default selector covers the whole dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSelector {
    /// Dataset the group is drawn from; the request's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_labels: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_labels: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSelector>,
    /// `true` keeps misclassified samples, `false` keeps correct ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<[f64; 2]>,
}

impl GroupSelector {
    pub fn band(&self) -> Result<Option<ConfidenceBand>, CompareError> {
        self.confidence
            .map(|[lo, hi]| ConfidenceBand::new(lo, hi).map_err(|e| CompareError::InvalidSelector(e.to_string())))
            .transpose()
    }
}

/// Ascending indices of samples matching every predicate of `selector`.
/// The group name is used in the error for an empty result.
pub fn resolve_group(
    dataset: &Dataset,
    layout: &ProjectedLayout,
    selector: &GroupSelector,
    name: &'static str,
) -> Result<Vec<usize>, CompareError> {
    let band = selector.band()?;
    let in_region: Option<BTreeSet<usize>> =
        selector.region.as_ref().map(|r| select_region(layout, r).into_iter().collect());
    let out: Vec<usize> = dataset
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| selector.gold_labels.as_ref().is_none_or(|l| l.contains(&s.gold_label)))
        .filter(|(_, s)| selector.pred_labels.as_ref().is_none_or(|l| l.contains(&s.pred_label)))
        .filter(|(_, s)| selector.errors.is_none_or(|e| s.is_error() == e))
        .filter(|(_, s)| band.is_none_or(|b| b.contains(s.confidence)))
        .filter(|(i, _)| in_region.as_ref().is_none_or(|r| r.contains(i)))
        .map(|(i, _)| i)
        .collect();
    if out.is_empty() {
        return Err(CompareError::EmptyGroup(name));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Normalized word occurrences.
    #[default]
    Words,
    /// Concept occurrences via the lexicon.
    Concepts,
    /// One count per sample for its gold label.
    Labels,
    /// One count per sample for its predicted label.
    PredLabels,
}

/// Item occurrence counts over the samples `group`.
pub fn count_items(dataset: &Dataset, group: &[usize], kind: ItemKind, ignore_stopwords: bool) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &i in group {
        let s = dataset.sample(i);
        match kind {
            ItemKind::Labels => *counts.entry(s.gold_label.clone()).or_default() += 1,
            ItemKind::PredLabels => *counts.entry(s.pred_label.clone()).or_default() += 1,
            ItemKind::Words | ItemKind::Concepts => {
                for w in dataset.words(i) {
                    if ignore_stopwords && dataset.stopwords().contains(&w) {
                        continue;
                    }
                    if kind == ItemKind::Words {
                        *counts.entry(w).or_default() += 1;
                    } else {
                        for c in dataset.lexicon().concepts(&w) {
                            *counts.entry(c.clone()).or_default() += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Shared,
    ASide,
    BSide,
}

impl Verdict {
    pub fn from_z(z: f64) -> Self {
        if z.abs() < Z_CRIT {
            Self::Shared
        } else if z > 0.0 {
            Self::ASide
        } else {
            Self::BSide
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceItem {
    pub item: String,
    pub kind: ItemKind,
    pub count_a: usize,
    pub count_b: usize,
    #[serde(serialize_with = "num::sig9")]
    pub z: f64,
    pub verdict: Verdict,
}

/// Weighted log-odds z-scores with prior `α_w = α₀ · (y_w^A + y_w^B) / (n^A + n^B)`.
/// Positive z leans toward group A. Sorted by |z| descending, then item.
pub fn divergence_from_counts(
    a: &BTreeMap<String, usize>,
    b: &BTreeMap<String, usize>,
    kind: ItemKind,
) -> Vec<DivergenceItem> {
    let n_a: usize = a.values().sum();
    let n_b: usize = b.values().sum();
    let pooled = (n_a + n_b) as f64;
    let items: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let mut out: Vec<DivergenceItem> = items
        .into_iter()
        .map(|item| {
            let ya = a.get(item).copied().unwrap_or(0);
            let yb = b.get(item).copied().unwrap_or(0);
            let alpha = PRIOR_MASS * (ya + yb) as f64 / pooled;
            let (fa, fb) = (ya as f64 + alpha, yb as f64 + alpha);
            let odds_a = (fa / (n_a as f64 + PRIOR_MASS - fa)).ln();
            let odds_b = (fb / (n_b as f64 + PRIOR_MASS - fb)).ln();
            // An item holding all mass on both sides has infinite odds on
            // both and cannot diverge.
            let z = if ya + yb == n_a + n_b {
                0.0
            } else {
                (odds_a - odds_b) / (1.0 / fa + 1.0 / fb).sqrt()
            };
            DivergenceItem {
                item: item.clone(),
                kind,
                count_a: ya,
                count_b: yb,
                z,
                verdict: Verdict::from_z(z),
            }
        })
        .collect();
    out.sort_by(|x, y| y.z.abs().total_cmp(&x.z.abs()).then_with(|| x.item.cmp(&y.item)));
    out
}

/// Divergence between two groups, possibly from different datasets.
pub fn divergence(
    (dataset_a, group_a): (&Dataset, &[usize]),
    (dataset_b, group_b): (&Dataset, &[usize]),
    kind: ItemKind,
    ignore_stopwords: bool,
) -> Result<Vec<DivergenceItem>, CompareError> {
    if group_a.is_empty() {
        return Err(CompareError::EmptyGroup("a"));
    }
    if group_b.is_empty() {
        return Err(CompareError::EmptyGroup("b"));
    }
    let a = count_items(dataset_a, group_a, kind, ignore_stopwords);
    let b = count_items(dataset_b, group_b, kind, ignore_stopwords);
    Ok(divergence_from_counts(&a, &b, kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn identical_groups_share_everything() {
        let a = counts(&[("card", 10), ("top", 3)]);
        for item in divergence_from_counts(&a, &a, ItemKind::Words) {
            assert_eq!(item.z, 0.0);
            assert_eq!(item.verdict, Verdict::Shared);
        }
    }

    #[test]
    fn swap_negates() {
        let a = counts(&[("card", 400), ("top", 300), ("x", 100)]);
        let b = counts(&[("card", 50), ("top", 900), ("y", 20)]);
        let ab = divergence_from_counts(&a, &b, ItemKind::Words);
        let ba = divergence_from_counts(&b, &a, ItemKind::Words);
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(x.item, y.item);
            assert_eq!(x.z, -y.z);
        }
        let card = ab.iter().find(|d| d.item == "card").unwrap();
        assert_eq!(card.verdict, Verdict::ASide);
    }

    #[test]
    fn selector_json_shape() {
        let s: GroupSelector =
            serde_json::from_str(r#"{"pred_labels":["a"],"region":[0,0,1,1],"confidence":[0,0.5]}"#).unwrap();
        assert!(s.region.is_some());
        assert!(serde_json::from_str::<GroupSelector>(r#"{"bogus":1}"#).is_err());
    }
}
