use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExplainCaches, ExplainError};
use crate::ingest::{Dataset, BUILTIN_METRICS};
use crate::labels::cosine_distance;
use crate::matrix::{dot, norm, Matrix};
use crate::num;
use crate::text::normalize_word;

/// Per-class word counts backing the class-based tf-idf metric. Classes are
/// gold labels; each class is the concatenation of its samples' words.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassTermStats {
    class_counts: BTreeMap<String, BTreeMap<String, usize>>,
    class_totals: BTreeMap<String, usize>,
    term_totals: BTreeMap<String, usize>,
    mean_class_words: f64,
}

impl ClassTermStats {
    pub fn build(dataset: &Dataset) -> Self {
        let mut stats = Self::default();
        for (i, s) in dataset.samples().iter().enumerate() {
            let counts = stats.class_counts.entry(s.gold_label.clone()).or_default();
            let total = stats.class_totals.entry(s.gold_label.clone()).or_default();
            for w in dataset.words(i) {
                *counts.entry(w.clone()).or_default() += 1;
                *stats.term_totals.entry(w).or_default() += 1;
                *total += 1;
            }
        }
        if !stats.class_totals.is_empty() {
            stats.mean_class_words =
                stats.class_totals.values().sum::<usize>() as f64 / stats.class_totals.len() as f64;
        }
        stats
    }

    /// `tf(word, class) · ln(1 + A / f(word))`, with `tf` the word's share of
    /// the class's words, `A` the mean word count per class and `f` the
    /// word's corpus frequency. Zero for words absent from the class.
    pub fn weight(&self, class: &str, word: &str) -> f64 {
        let Some(count) = self.class_counts.get(class).and_then(|c| c.get(word)) else {
            return 0.0;
        };
        let total = self.class_totals[class] as f64;
        let f = self.term_totals[word] as f64;
        (*count as f64 / total) * (1.0 + self.mean_class_words / f).ln()
    }
}

/// Clamps negatives to zero and scales to unit sum; an all-zero vector
/// becomes uniform.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = raw.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect();
    let total: f64 = clamped.iter().sum();
    if total > 0.0 && total.is_finite() {
        clamped.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

/// Raw occlusion: how much the cosine distance between the mean-pooled
/// tokens and `prototype` grows when token `i` is left out of the pool.
/// A single token cannot be left out and scores 0.
pub fn occlusion_scores(tokens: &Matrix, prototype: &[f64]) -> Vec<f64> {
    let n = tokens.rows();
    let sum: Vec<f64> = (0..tokens.cols())
        .map(|c| (0..n).map(|r| tokens.get(r, c)).sum())
        .collect();
    let pooled: Vec<f64> = sum.iter().map(|v| v / n as f64).collect();
    let full = cosine_distance(&pooled, prototype);
    (0..n)
        .map(|i| {
            if n == 1 {
                return 0.0;
            }
            let rest: Vec<f64> = sum
                .iter()
                .zip(tokens.row(i))
                .map(|(s, t)| (s - t) / (n - 1) as f64)
                .collect();
            cosine_distance(&rest, prototype) - full
        })
        .collect()
}

/// Raw similarity contribution: `⟨t_i, c⟩ / (n‖pool‖‖c‖)`, which sums over
/// tokens to the cosine between the pooled tokens and the prototype.
pub fn similarity_scores(tokens: &Matrix, prototype: &[f64]) -> Vec<f64> {
    let n = tokens.rows();
    let pooled = tokens.mean_row().unwrap_or_default();
    let denom = n as f64 * norm(&pooled) * norm(prototype);
    if denom == 0.0 {
        return vec![0.0; n];
    }
    tokens.iter_rows().map(|t| dot(t, prototype) / denom).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricScores {
    pub metric: String,
    #[serde(serialize_with = "num::sig9_vec")]
    pub scores: Vec<f64>,
}

/// Normalized per-token scores, one entry per metric in stacking order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceProfile {
    pub sample_id: String,
    pub tokens: Vec<String>,
    pub metrics: Vec<MetricScores>,
}

impl ImportanceProfile {
    pub fn metric_names(&self) -> Vec<&str> {
        self.metrics.iter().map(|m| m.metric.as_str()).collect()
    }

    /// Stacked total per token.
    pub fn totals(&self) -> Vec<f64> {
        (0..self.tokens.len())
            .map(|i| self.metrics.iter().map(|m| m.scores[i]).sum())
            .collect()
    }
}

/// Metrics in their default stacking order: built-ins, then the sample's
/// external metrics by name.
pub fn default_metrics(dataset: &Dataset, sample: usize) -> Vec<String> {
    let id = &dataset.sample(sample).id;
    BUILTIN_METRICS
        .iter()
        .copied()
        .chain(dataset.external_importance().metrics_for(id))
        .map(str::to_string)
        .collect()
}

/// Importance profile for one sample. An empty `metrics` list selects the
/// default metrics; duplicates keep their first position.
pub fn vifi(
    dataset: &Dataset,
    caches: &ExplainCaches,
    sample_id: &str,
    metrics: &[String],
) -> Result<ImportanceProfile, ExplainError> {
    let idx = dataset
        .index_of(sample_id)
        .ok_or_else(|| ExplainError::UnknownSample(sample_id.to_string()))?;
    let sample = dataset.sample(idx);
    let requested = if metrics.is_empty() {
        default_metrics(dataset, idx)
    } else {
        let mut seen = Vec::new();
        for m in metrics {
            if !seen.contains(m) {
                seen.push(m.clone());
            }
        }
        seen
    };

    let tokens = dataset.embeddings().tokens(idx);
    let prototype = || {
        caches
            .prototypes
            .get(&sample.pred_label)
            .ok_or_else(|| ExplainError::NoPrototype(sample.pred_label.clone()))
    };
    let mut out = Vec::with_capacity(requested.len());
    for metric in requested {
        let raw = match metric.as_str() {
            "occlusion" => occlusion_scores(tokens, prototype()?),
            "similarity" => similarity_scores(tokens, prototype()?),
            "ctfidf" => sample
                .tokens
                .iter()
                .map(|t| normalize_word(t).map_or(0.0, |w| caches.terms.weight(&sample.pred_label, &w)))
                .collect(),
            other => dataset
                .external_importance()
                .get(sample_id, other)
                .ok_or_else(|| ExplainError::UnknownMetric(other.to_string()))?
                .to_vec(),
        };
        out.push(MetricScores {
            scores: normalize_scores(&raw),
            metric,
        });
    }
    Ok(ImportanceProfile {
        sample_id: sample.id.clone(),
        tokens: sample.tokens.clone(),
        metrics: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_clamps_and_falls_back_to_uniform() {
        assert_eq!(normalize_scores(&[-1.0, 1.0, 3.0]), vec![0.0, 0.25, 0.75]);
        assert_eq!(normalize_scores(&[-1.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(normalize_scores(&[0.0]), vec![1.0]);
    }

    #[test]
    fn identical_tokens_score_equally() {
        let t = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [0.0, -1.0]]);
        let c = [0.5, 0.3];
        let o = occlusion_scores(&t, &c);
        let s = similarity_scores(&t, &c);
        assert_eq!(o[0], o[1]);
        assert_eq!(s[0], s[1]);
    }

    #[test]
    fn similarity_scores_sum_to_cosine() {
        let t = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.5, -1.0, 0.0]]);
        let c = [0.2, 0.4, -0.1];
        let total: f64 = similarity_scores(&t, &c).iter().sum();
        let pooled = t.mean_row().unwrap();
        assert!((total - crate::matrix::cosine(&pooled, &c)).abs() < 1e-12);
    }
}
