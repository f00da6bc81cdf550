//! Principal component scores.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::matrix::Matrix;

/// Projects the rows of `data` onto their top `k` principal components.
///
/// Columns are centered first. The eigenproblem is solved on whichever of
/// the covariance (`d × d`) or Gram (`M × M`) matrix is smaller. Each
/// component's sign is fixed so that its largest-magnitude score is
/// positive, which makes the output independent of solver sign choices.
pub fn pca_scores(data: &Matrix, k: usize) -> Matrix {
    let (m, d) = (data.rows(), data.cols());
    let k = k.min(d).min(m.max(1));
    if m == 0 || k == 0 {
        return Matrix::zeros(m, k);
    }
    let mean = data.mean_row().expect("non-empty");
    let x = DMatrix::from_fn(m, d, |i, j| data.get(i, j) - mean[j]);

    let mut scores = DMatrix::<f64>::zeros(m, k);
    if d <= m {
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        for (c, idx) in top_indices(eig.eigenvalues.as_slice(), k).into_iter().enumerate() {
            let v = eig.eigenvectors.column(idx);
            scores.set_column(c, &(&x * v));
        }
    } else {
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        for (c, idx) in top_indices(eig.eigenvalues.as_slice(), k).into_iter().enumerate() {
            let s = eig.eigenvalues[idx].max(0.0).sqrt();
            let u = eig.eigenvectors.column(idx);
            scores.set_column(c, &(u * s));
        }
    }

    let mut out = Matrix::zeros(m, k);
    for c in 0..k {
        let col = scores.column(c);
        let mut pivot = 0;
        for i in 1..m {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            // adding 0.0 turns -0.0 into +0.0
            out.set(i, c, sign * col[i] + 0.0);
        }
    }
    out
}

fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
