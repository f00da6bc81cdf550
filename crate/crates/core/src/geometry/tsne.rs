//! Exact t-SNE: Gaussian input affinities calibrated to a perplexity,
//! Student-t output kernel, KL divergence minimized by gradient descent with
//! momentum and per-coordinate gains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{GeometryError, Point2, ProjectionParams};
use crate::matrix::{squared_distance, Matrix};

const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const PERPLEXITY_STEPS: usize = 200;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MOMENTUM_SWITCH: usize = 250;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

/// Symmetric joint affinities `p_ij = (p_j|i + p_i|j) / 2M`, which sum to 1.
pub fn joint_probabilities(data: &Matrix, perplexity: f64) -> Matrix {
    let n = data.rows();
    let target = perplexity.ln();
    let conditional: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist: Vec<f64> = (0..n)
                .map(|j| if i == j { 0.0 } else { squared_distance(data.row(i), data.row(j)) })
                .collect();
            conditional_row(i, &dist, target)
        })
        .collect();

    let mut p = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.set(i, j, (conditional[i][j] + conditional[j][i]) / denom);
            }
        }
    }
    p
}

/// Binary search on the Gaussian precision so the row's entropy matches
/// `ln(perplexity)`.
fn conditional_row(i: usize, dist: &[f64], target_entropy: f64) -> Vec<f64> {
    let n = dist.len();
    let mut row = vec![0.0; n];
    if n < 2 {
        return row;
    }
    let d_min = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[j])
        .fold(f64::INFINITY, f64::min);

    let mut beta = 1.0;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..PERPLEXITY_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for j in 0..n {
            if j == i {
                row[j] = 0.0;
                continue;
            }
            let shifted = dist[j] - d_min;
            let v = (-shifted * beta).exp();
            row[j] = v;
            sum += v;
            weighted += shifted * v;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        let diff = entropy - target_entropy;
        if diff.abs() < PERPLEXITY_TOLERANCE {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
    row
}

/// Sum of Student-t numerators over all ordered pairs `i ≠ j`.
fn normalizer(y: &[Point2]) -> f64 {
    let row_sums: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..y.len() {
                if j != i {
                    s += 1.0 / (1.0 + sq(y[i], y[j]));
                }
            }
            s
        })
        .collect();
    row_sums.iter().sum()
}

#[inline]
fn sq(a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

/// Gradient with every `p_ij` multiplied by `scale` (early exaggeration).
fn gradient_scaled(p: &Matrix, scale: f64, y: &[Point2]) -> Vec<Point2> {
    let z = normalizer(y);
    (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0, 0.0];
            let prow = p.row(i);
            for j in 0..y.len() {
                if j == i {
                    continue;
                }
                let num = 1.0 / (1.0 + sq(y[i], y[j]));
                let coeff = (scale * prow[j] - num / z) * num;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

fn check_affinities(p: &Matrix, y: &[Point2]) -> Result<(), GeometryError> {
    let n = p.rows();
    if p.cols() != n || y.len() != n {
        return Err(GeometryError::Shape(format!(
            "affinities are {}×{} but there are {} positions",
            p.rows(),
            p.cols(),
            y.len()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (p.get(i, j), p.get(j, i));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(GeometryError::NonSymmetric { i, j });
            }
        }
    }
    Ok(())
}

/// Analytic gradient of `KL(P ‖ Q)` with respect to the 2-D positions:
/// `dC/dy_i = 4 Σ_j (p_ij − q_ij)(y_i − y_j)(1 + ‖y_i − y_j‖²)⁻¹`.
pub fn tsne_gradient(p: &Matrix, y: &[Point2]) -> Result<Vec<Point2>, GeometryError> {
    check_affinities(p, y)?;
    Ok(gradient_scaled(p, 1.0, y))
}

/// `KL(P ‖ Q)` summed over pairs with `p_ij > 0`.
pub fn kl_divergence(p: &Matrix, y: &[Point2]) -> f64 {
    let z = normalizer(y);
    let rows: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..y.len() {
                let pij = p.get(i, j);
                if j != i && pij > 0.0 {
                    let q = 1.0 / (1.0 + sq(y[i], y[j])) / z;
                    s += pij * (pij / q).ln();
                }
            }
            s
        })
        .collect();
    rows.iter().sum()
}

/// Seeded Gaussian start positions (standard deviation `1e-4`).
pub fn initial_positions(n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect()
}

pub(crate) fn center(y: &mut [Point2]) {
    if y.is_empty() {
        return;
    }
    let n = y.len() as f64;
    let mx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= mx;
        p[1] -= my;
    }
}

/// Runs the optimizer from `y` and returns the centered result.
pub fn optimize(p: &Matrix, mut y: Vec<Point2>, params: &ProjectionParams) -> Vec<Point2> {
    let n = y.len();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    for iter in 0..params.iterations {
        let scale = if iter < params.exaggeration_iterations {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };
        let grad = gradient_scaled(p, scale, &y);
        for i in 0..n {
            for c in 0..2 {
                let g = grad[i][c];
                let gain = if (g > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    gains[i][c] * 0.8
                };
                let gain = f64::max(gain, MIN_GAIN);
                gains[i][c] = gain;
                update[i][c] = momentum * update[i][c] - params.learning_rate * gain * g;
                y[i][c] += update[i][c];
            }
        }
        center(&mut y);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Matrix {
        let mut p = Matrix::zeros(n, n);
        let v = 1.0 / (n * (n - 1)) as f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p.set(i, j, v);
                }
            }
        }
        p
    }

    #[test]
    fn equilateral_triangle_with_uniform_p_is_stationary() {
        let h = 3f64.sqrt() / 2.0;
        let y = [[0.0, 1.0], [-h, -0.5], [h, -0.5]];
        let g = tsne_gradient(&uniform(3), &y).unwrap();
        for gi in g {
            assert!(gi[0].abs() < 1e-15 && gi[1].abs() < 1e-15, "{gi:?}");
        }
    }

    #[test]
    fn rejects_asymmetric_p() {
        let mut p = uniform(3);
        p.set(0, 1, 0.3);
        assert!(matches!(
            tsne_gradient(&p, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(GeometryError::NonSymmetric { i: 0, j: 1 })
        ));
    }

    #[test]
    fn joint_probabilities_sum_to_one_and_match_perplexity() {
        let data = Matrix::from_rows(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 2.0],
            [3.0, 1.0],
            [2.0, 2.0],
            [-1.0, 1.0],
            [0.5, -2.0],
        ]);
        let p = joint_probabilities(&data, 2.0);
        let total: f64 = p.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(p.get(i, j), p.get(j, i));
            }
        }
        let dist: Vec<f64> = (0..7).map(|j| squared_distance(data.row(0), data.row(j))).collect();
        let row = conditional_row(0, &dist, 2f64.ln());
        let entropy: f64 = -row.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        assert!((entropy.exp() - 2.0).abs() < 1e-4);
    }
}
