//! 2-D projection of sample embeddings and the geometric primitives the
//! views rely on.

mod hull;
mod layout_file;
mod median;
pub mod pca;
mod region;
pub mod tsne;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use hull::{convex_hull, cross, hull_contains};
pub use layout_file::{decode_layout, encode_layout, read_layout, write_layout};
pub use median::{geometric_median, median_objective};
pub use region::{select_region, RegionSelector};
pub use tsne::{kl_divergence, tsne_gradient};

pub type Point2 = [f64; 2];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("projection needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("affinity matrix is not symmetric at ({i}, {j})")]
    NonSymmetric { i: usize, j: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid projection parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    #[default]
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionParams {
    pub method: ProjectionMethod,
    /// Clamped to `(M − 1) / 3` before optimization.
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    /// PCA target dimension before t-SNE; `None` means `min(50, d)`.
    pub pca_dims: Option<usize>,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            method: ProjectionMethod::Tsne,
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            pca_dims: None,
        }
    }
}

impl ProjectionParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |what: &str| Err(GeometryError::InvalidParams(what.to_string()));
        if !(self.perplexity > 0.0 && self.perplexity.is_finite()) {
            return bad("perplexity must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.early_exaggeration > 0.0 && self.early_exaggeration.is_finite()) {
            return bad("early_exaggeration must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.pca_dims == Some(0) {
            return bad("pca_dims must be positive");
        }
        Ok(())
    }

    pub fn effective_perplexity(&self, samples: usize) -> f64 {
        self.perplexity.min((samples as f64 - 1.0) / 3.0)
    }

    pub fn effective_pca_dims(&self, dim: usize) -> usize {
        self.pca_dims.unwrap_or(50).min(dim)
    }
}

/// 2-D coordinates for every sample, with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLayout {
    pub positions: Vec<Point2>,
    pub method: ProjectionMethod,
    pub seed: u64,
    pub params: ProjectionParams,
    pub warning: Option<String>,
}

impl ProjectedLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Rounds positions to `f32`, the precision of the layout cache file.
    pub fn quantized(mut self) -> Self {
        for p in &mut self.positions {
            p[0] = p[0] as f32 as f64;
            p[1] = p[1] as f32 as f64;
        }
        self
    }
}

/// Input to t-SNE: centered PCA scores, or the centered data itself when
/// PCA would not reduce the dimension.
pub fn reduce_for_tsne(embeddings: &Matrix, params: &ProjectionParams) -> Matrix {
    let k = params.effective_pca_dims(embeddings.cols());
    pca::pca_scores(embeddings, k)
}

/// Projects sample embeddings (one row per sample) to 2-D.
///
/// PCA to `pca_dims`, then exact t-SNE from seeded Gaussian starts; the
/// result is centered at the origin. Identical inputs, parameters and seed
/// give bit-identical positions. When every embedding is identical the
/// layout falls back to PCA (all points at the origin) and carries a warning.
pub fn project(embeddings: &Matrix, params: &ProjectionParams, seed: u64) -> Result<ProjectedLayout, GeometryError> {
    params.validate()?;
    let m = embeddings.rows();
    if m < 2 {
        return Err(GeometryError::TooFewSamples(m));
    }

    let degenerate = (1..m).all(|i| embeddings.row(i) == embeddings.row(0));
    if degenerate || params.method == ProjectionMethod::Pca {
        let scores = pca::pca_scores(embeddings, 2);
        let mut positions: Vec<Point2> = (0..m)
            .map(|i| [scores.get(i, 0), if scores.cols() > 1 { scores.get(i, 1) } else { 0.0 }])
            .collect();
        tsne::center(&mut positions);
        return Ok(ProjectedLayout {
            positions,
            method: ProjectionMethod::Pca,
            seed,
            params: params.clone(),
            warning: degenerate.then(|| {
                "all sample embeddings are identical; returning the PCA layout".to_string()
            }),
        });
    }

    let reduced = reduce_for_tsne(embeddings, params);
    let p = tsne::joint_probabilities(&reduced, params.effective_perplexity(m));
    let y0 = tsne::initial_positions(m, seed);
    let mut positions = tsne::optimize(&p, y0, params);
    tsne::center(&mut positions);
    Ok(ProjectedLayout {
        positions,
        method: ProjectionMethod::Tsne,
        seed,
        params: params.clone(),
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples_are_symmetric_about_origin() {
        let data = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]]);
        let layout = project(&data, &ProjectionParams::default(), DEFAULT_SEED).unwrap();
        let [a, b] = [layout.positions[0], layout.positions[1]];
        assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12, "{a:?} {b:?}");
        assert!(a != [0.0, 0.0]);
    }

    #[test]
    fn rejects_single_sample() {
        let data = Matrix::from_rows(&[[1.0, 2.0]]);
        assert_eq!(
            project(&data, &ProjectionParams::default(), 1),
            Err(GeometryError::TooFewSamples(1))
        );
    }

    #[test]
    fn identical_embeddings_fall_back_to_pca() {
        let data = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        let layout = project(&data, &ProjectionParams::default(), 1).unwrap();
        assert_eq!(layout.method, ProjectionMethod::Pca);
        assert!(layout.warning.is_some());
        assert!(layout.positions.iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn perplexity_clamp() {
        let p = ProjectionParams::default();
        assert_eq!(p.effective_perplexity(12), 11.0 / 3.0);
        assert_eq!(p.effective_perplexity(1000), 30.0);
    }
}
