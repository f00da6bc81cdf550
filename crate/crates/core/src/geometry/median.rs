//! Geometric median by Weiszfeld iteration.

use crate::matrix::distance;

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-6;
/// Largest multiple of a Weiszfeld step tried per iteration.
const MAX_EXTRAPOLATION: f64 = 64.0;
/// Distances are floored here so an iterate landing on an input point
/// does not divide by zero.
const COINCIDENCE_EPS: f64 = 1e-9;

/// Sum of Euclidean distances from `m` to every point.
pub fn median_objective<P: AsRef<[f64]>>(points: &[P], m: &[f64]) -> f64 {
    points.iter().map(|p| distance(p.as_ref(), m)).sum()
}

/// Point minimizing the sum of distances to `points` (any dimension).
///
/// Starts from the centroid, runs at most 100 Weiszfeld steps (each
/// stretched by a doubling line search) and stops once a step moves less
/// than `1e-6`. The best iterate seen is returned, so the
/// result is never worse than the centroid. Weiszfeld crawls toward a
/// minimizer that coincides with an input point, so after every step the
/// input point nearest the iterate is tested against the subgradient
/// optimality condition and returned exactly when it passes.
///
/// Panics on an empty input.
pub fn geometric_median<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    assert!(!points.is_empty(), "geometric median of no points");
    let dim = points[0].as_ref().len();
    let n = points.len() as f64;

    let mut m = vec![0.0; dim];
    for p in points {
        for (mi, v) in m.iter_mut().zip(p.as_ref()) {
            *mi += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n);
    if points.len() == 1 {
        return points[0].as_ref().to_vec();
    }

    let mut best_obj = median_objective(points, &m);
    let mut best = m.clone();
    let mut next = vec![0.0; dim];
    for _ in 0..MAX_ITERATIONS {
        if let Some(anchor) = optimal_input_point(points, &m) {
            return anchor.to_vec();
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut weight_sum = 0.0;
        for p in points {
            let p = p.as_ref();
            let w = 1.0 / distance(p, &m).max(COINCIDENCE_EPS);
            for (nv, pv) in next.iter_mut().zip(p) {
                *nv += w * pv;
            }
            weight_sum += w;
        }
        next.iter_mut().for_each(|v| *v /= weight_sum);
        // Extrapolate along the Weiszfeld step while the objective keeps
        // falling; the plain step (factor 1) always descends.
        let dir: Vec<f64> = next.iter().zip(&m).map(|(a, b)| a - b).collect();
        let mut obj = median_objective(points, &next);
        let mut factor = 2.0;
        while factor <= MAX_EXTRAPOLATION {
            let trial: Vec<f64> = m.iter().zip(&dir).map(|(b, d)| b + factor * d).collect();
            let t = median_objective(points, &trial);
            if t >= obj {
                break;
            }
            obj = t;
            next = trial;
            factor *= 2.0;
        }
        let step = distance(&next, &m);
        std::mem::swap(&mut m, &mut next);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&m);
        }
        if step < TOLERANCE {
            break;
        }
    }

    if let Some(anchor) = optimal_input_point(points, &best) {
        if median_objective(points, anchor) <= best_obj {
            return anchor.to_vec();
        }
    }
    best
}

/// The input point nearest to `m`, if it is itself a minimizer: the unit
/// vectors from it to all other points must sum to at most its multiplicity.
fn optimal_input_point<'a, P: AsRef<[f64]>>(points: &'a [P], m: &[f64]) -> Option<&'a [f64]> {
    let anchor = points
        .iter()
        .map(AsRef::as_ref)
        .min_by(|a, b| distance(a, m).total_cmp(&distance(b, m)))?;
    let mut pull = vec![0.0; anchor.len()];
    let mut multiplicity = 0.0;
    for p in points {
        let p = p.as_ref();
        let d = distance(p, anchor);
        if d == 0.0 {
            multiplicity += 1.0;
            continue;
        }
        for ((g, pv), av) in pull.iter_mut().zip(p).zip(anchor) {
            *g += (pv - av) / d;
        }
    }
    let pull_norm = pull.iter().map(|g| g * g).sum::<f64>().sqrt();
    (pull_norm <= multiplicity).then_some(anchor)
}
