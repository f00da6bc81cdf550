//! Region selectors over the projected layout.

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2, ProjectedLayout};

/// A 2-D selection. Serialized as a flat coordinate list: empty for
/// everything, two points for a rectangle, three or more for a lasso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub enum RegionSelector {
    All,
    /// Axis-aligned rectangle given by two opposite corners.
    ViewportRect([Point2; 2]),
    /// Closed polygon, filled with the even-odd rule.
    Lasso(Vec<Point2>),
}

impl RegionSelector {
    pub fn rect(a: Point2, b: Point2) -> Result<Self, GeometryError> {
        if !(a.iter().chain(&b).all(|v| v.is_finite())) {
            return Err(GeometryError::InvalidRegion("non-finite rectangle corner".into()));
        }
        Ok(Self::ViewportRect([
            [a[0].min(b[0]), a[1].min(b[1])],
            [a[0].max(b[0]), a[1].max(b[1])],
        ]))
    }

    pub fn lasso(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidRegion(format!(
                "lasso needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRegion("non-finite lasso vertex".into()));
        }
        let n = vertices.len();
        let twice_area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if twice_area == 0.0 {
            return Err(GeometryError::InvalidRegion("lasso polygon has zero area".into()));
        }
        Ok(Self::Lasso(vertices))
    }

    /// Parses `x1,y1,x2,y2,...`.
    pub fn from_flat(coords: &[f64]) -> Result<Self, GeometryError> {
        if coords.len() % 2 != 0 {
            return Err(GeometryError::InvalidRegion(
                "odd number of region coordinates".into(),
            ));
        }
        let pts: Vec<Point2> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        match pts.len() {
            0 => Ok(Self::All),
            1 => Err(GeometryError::InvalidRegion("a region needs at least 2 points".into())),
            2 => Self::rect(pts[0], pts[1]),
            _ => Self::lasso(pts),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Self::All => Vec::new(),
            Self::ViewportRect(c) => vec![c[0][0], c[0][1], c[1][0], c[1][1]],
            Self::Lasso(v) => v.iter().flatten().copied().collect(),
        }
    }

    /// Boundary-inclusive membership test.
    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Self::All => true,
            Self::ViewportRect([lo, hi]) => {
                p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
            }
            Self::Lasso(v) => on_boundary(v, p) || even_odd(v, p),
        }
    }
}

impl TryFrom<Vec<f64>> for RegionSelector {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_flat(&v)
    }
}

impl From<RegionSelector> for Vec<f64> {
    fn from(r: RegionSelector) -> Self {
        r.to_flat()
    }
}

fn on_boundary(v: &[Point2], p: Point2) -> bool {
    let n = v.len();
    (0..n).any(|i| {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        cross == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    })
}

fn even_odd(v: &[Point2], p: Point2) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Indices (ascending) of layout points inside the selector.
pub fn select_region(layout: &ProjectedLayout, selector: &RegionSelector) -> Vec<usize> {
    layout
        .positions
        .iter()
        .enumerate()
        .filter(|(_, p)| selector.contains(**p))
        .map(|(i, _)| i)
        .collect()
}
