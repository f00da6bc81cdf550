use serde::Serialize;

use super::{ContrastTriple, ExplainError};
use crate::ingest::Dataset;
use crate::matrix::{cosine, dot, norm, Matrix};
use crate::num;

pub const DEFAULT_TAU: f64 = 0.4;

/// Per-token shares of the cosine between two mean-pooled token sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairContributions {
    #[serde(serialize_with = "num::sig9_vec")]
    pub query: Vec<f64>,
    #[serde(serialize_with = "num::sig9_vec")]
    pub other: Vec<f64>,
    #[serde(serialize_with = "num::sig9")]
    pub cosine: f64,
}

/// `c_i = Σ_j ⟨q_i, s_j⟩ / (n·m·‖pool q‖·‖pool s‖)` for query tokens, and the
/// mirror image for the other side. Each side sums to the pooled cosine.
/// Returns `None` when either pooled vector has zero norm.
pub fn pair_contributions(query: &Matrix, other: &Matrix) -> Option<PairContributions> {
    let pq = query.mean_row()?;
    let ps = other.mean_row()?;
    let denom = (query.rows() * other.rows()) as f64 * norm(&pq) * norm(&ps);
    if denom == 0.0 {
        return None;
    }
    let sum_q: Vec<f64> = pq.iter().map(|v| v * query.rows() as f64).collect();
    let sum_s: Vec<f64> = ps.iter().map(|v| v * other.rows() as f64).collect();
    Some(PairContributions {
        query: query.iter_rows().map(|q| dot(q, &sum_s) / denom).collect(),
        other: other.iter_rows().map(|s| dot(s, &sum_q) / denom).collect(),
        cosine: cosine(&pq, &ps),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnHeader {
    /// `query`, `closest` or `contrast`.
    pub role: &'static str,
    pub sample_id: String,
    pub gold_label: String,
    pub pred_label: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationEdge {
    /// Column the query token links to: `closest` or `contrast`.
    pub target: &'static str,
    pub query_token: usize,
    pub other_token: usize,
    #[serde(serialize_with = "num::sig9")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationGraph {
    pub columns: [ColumnHeader; 3],
    #[serde(serialize_with = "num::sig9")]
    pub tau: f64,
    pub edges: Vec<RelationEdge>,
    pub closest: PairContributions,
    pub contrast: PairContributions,
}

/// Token-to-token links with cosine ≥ `tau` from the query to the closest
/// and contrast samples, plus token-to-similarity contributions for both
/// pairs.
pub fn relation_graph(dataset: &Dataset, triple: &ContrastTriple, tau: f64) -> Result<RelationGraph, ExplainError> {
    if !tau.is_finite() || !(-1.0..=1.0).contains(&tau) {
        return Err(ExplainError::InvalidTau(tau));
    }
    let find = |id: &str| dataset.index_of(id).ok_or_else(|| ExplainError::UnknownSample(id.to_string()));
    let idx = [find(&triple.query_id)?, find(&triple.closest_id)?, find(&triple.contrast_id)?];
    let roles = ["query", "closest", "contrast"];
    let columns = [0, 1, 2].map(|k| {
        let s = dataset.sample(idx[k]);
        ColumnHeader {
            role: roles[k],
            sample_id: s.id.clone(),
            gold_label: s.gold_label.clone(),
            pred_label: s.pred_label.clone(),
            tokens: s.tokens.clone(),
        }
    });

    let tokens = |k: usize| dataset.embeddings().tokens(idx[k]);
    let mut edges = Vec::new();
    for k in [1, 2] {
        for (i, q) in tokens(0).iter_rows().enumerate() {
            for (j, s) in tokens(k).iter_rows().enumerate() {
                let weight = cosine(q, s);
                if weight >= tau {
                    edges.push(RelationEdge {
                        target: roles[k],
                        query_token: i,
                        other_token: j,
                        weight,
                    });
                }
            }
        }
    }

    let contributions = |k: usize| {
        pair_contributions(tokens(0), tokens(k)).ok_or_else(|| {
            let zero = if tokens(0).mean_row().is_some_and(|p| norm(&p) == 0.0) { 0 } else { k };
            ExplainError::ZeroNorm(dataset.sample(idx[zero]).id.clone())
        })
    };
    Ok(RelationGraph {
        closest: contributions(1)?,
        contrast: contributions(2)?,
        columns,
        tau,
        edges,
    })
}
