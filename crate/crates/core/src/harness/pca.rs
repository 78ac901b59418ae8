use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Low-dimensional coordinates of a set of state vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// One row of `n_components` coordinates per input row.
    pub coords: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub warnings: Vec<String>,
}

/// PCA of the centered rows of `x` through the n x n Gram matrix, which stays
/// small when rows are few and wide. Component signs are fixed so the largest
/// magnitude score on each axis is positive. Components without variance come
/// back as zeros with a warning.
pub fn pca_embed(x: &[Vec<f64>], n_components: usize) -> Embedding {
    let n = x.len();
    let mut warnings = Vec::new();
    if n == 0 {
        return Embedding { coords: vec![], explained_variance: vec![0.0; n_components], explained_ratio: vec![0.0; n_components], warnings: vec!["no samples".into()] };
    }
    let d = x[0].len();
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
    let gram = DMatrix::from_fn(n, n, |i, j| centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>());
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let denom = (n.max(2) - 1) as f64;
    let tol = 1e-10 * total.max(f64::MIN_POSITIVE);

    let mut coords = vec![vec![0.0; n_components]; n];
    let mut explained_variance = vec![0.0; n_components];
    let mut explained_ratio = vec![0.0; n_components];
    for k in 0..n_components {
        let Some(&idx) = order.get(k) else {
            warnings.push(format!("component {k}: only {n} samples"));
            continue;
        };
        let lambda = eig.eigenvalues[idx];
        if !(lambda > tol) {
            warnings.push(format!("component {k}: no variance left"));
            continue;
        }
        // Scores are the Gram eigenvector scaled by sqrt(lambda).
        let u = eig.eigenvectors.column(idx);
        let s = lambda.sqrt();
        let pivot = (0..n).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
        let sign = if u[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][k] = sign * u[i] * s;
        }
        explained_variance[k] = lambda / denom;
        explained_ratio[k] = lambda / total;
    }
    Embedding { coords, explained_variance, explained_ratio, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_one_component() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
        let e = pca_embed(&x, 2);
        assert!((e.explained_ratio[0] - 1.0).abs() < 1e-9);
        assert!(e.coords.iter().all(|c| c[1] == 0.0));
        assert_eq!(e.warnings.len(), 1);
        // Distances along the line are preserved.
        let step = 5f64.sqrt();
        for w in e.coords.windows(2) {
            assert!(((w[1][0] - w[0][0]).abs() - step).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_covariance_eigenvalues() {
        let x = vec![vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 3.0], vec![1.0, 1.0, 0.0], vec![4.0, 2.0, 2.0], vec![0.5, 3.0, 1.0]];
        let n = x.len();
        let d = 3;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let cov = DMatrix::from_fn(d, d, |a, b| x.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1) as f64);
        let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let e = pca_embed(&x, 3);
        for k in 0..3 {
            assert!((e.explained_variance[k] - ev[k]).abs() < 1e-9, "{k}: {} vs {}", e.explained_variance[k], ev[k]);
        }
    }

    #[test]
    fn translation_invariant_and_sign_fixed() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 3.0], vec![7.0, 1.0], vec![0.0, 0.0]];
        let shifted: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] + 100.0, r[1] - 40.0]).collect();
        let a = pca_embed(&x, 2);
        let b = pca_embed(&shifted, 2);
        for (p, q) in a.coords.iter().zip(&b.coords) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
        for k in 0..2 {
            let top = a.coords.iter().map(|c| c[k]).max_by(|p, q| p.abs().total_cmp(&q.abs())).unwrap();
            assert!(top > 0.0);
        }
    }

    #[test]
    fn constant_input_warns() {
        let e = pca_embed(&vec![vec![3.0; 4]; 5], 2);
        assert_eq!(e.warnings.len(), 2);
        assert!(e.coords.iter().flatten().all(|&v| v == 0.0));
    }
}
