use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Centroids, InductionError};
use crate::matrix::Matrix;

/// Two-dimensional principal-component view of documents and centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub documents: Vec<[f64; 2]>,
    pub centroids: Vec<[f64; 2]>,
    /// Variance captured by each of the two axes.
    pub explained_variance: [f64; 2],
    /// Unit axes in embedding space.
    pub axes: [Vec<f64>; 2],
    pub mean: Vec<f64>,
}

/// Projects onto the top two eigenvectors of the sample covariance. Axis signs
/// are fixed so the largest-magnitude loading is positive.
pub fn project_2d(data: &Matrix, centroids: &Centroids) -> Result<Projection, InductionError> {
    let (n, m) = (data.rows(), data.cols());
    if m < 2 {
        return Err(InductionError::ProjectionDim(m));
    }
    if n == 0 {
        return Err(InductionError::NoData);
    }
    if centroids.dim() != m {
        return Err(InductionError::Dimension {
            expected: m,
            actual: centroids.dim(),
        });
    }
    let mut mean = vec![0.0; m];
    for r in data.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(r) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for r in data.iter_rows() {
        for a in 0..m {
            let da = r[a] - mean[a];
            for b in a..m {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    let denom = n as f64;
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let axis = |j: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[j]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, &x)| x)
            .unwrap_or(1.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let axes = [axis(0), axis(1)];
    let project = |row: &[f64]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, ax) in out.iter_mut().zip(&axes) {
            *o = row.iter().zip(&mean).zip(ax).map(|((x, mu), a)| (x - mu) * a).sum();
        }
        out
    };
    Ok(Projection {
        documents: data.iter_rows().map(project).collect(),
        centroids: centroids.matrix.iter_rows().map(project).collect(),
        explained_variance: [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)],
        axes,
        mean,
    })
}
