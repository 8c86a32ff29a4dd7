use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{nearest, Centroids, InductionError, TopicPartition};
use crate::matrix::{squared_distance, Matrix};

/// Result of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub partition: TopicPartition,
    pub centroids: Centroids,
    /// Inertia after each mean update; never increases.
    pub inertia_trace: Vec<f64>,
    /// True when the run stopped because no assignment changed.
    pub converged: bool,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        self.inertia_trace.last().copied().unwrap_or(0.0)
    }

    pub fn iterations(&self) -> usize {
        self.inertia_trace.len()
    }
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center, the next center is drawn uniformly from the unchosen points.
pub fn kmeans_plus_plus(data: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut centers = Matrix::zeros(0, data.cols());
    let first = rng.random_range(0..n);
    chosen.push(first);
    centers.push_row(data.row(first));
    let mut d2: Vec<f64> = data.iter_rows().map(|r| squared_distance(r, data.row(first))).collect();

    while centers.rows() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        centers.push_row(data.row(next));
        for (i, r) in data.iter_rows().enumerate() {
            let d = squared_distance(r, data.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

pub fn kmeans_fit(data: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<KMeansFit, InductionError> {
    let n = data.rows();
    if k < 1 || k > n {
        return Err(InductionError::InvalidK { k, n });
    }
    if max_iter < 1 {
        return Err(InductionError::InvalidMaxIter);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_plus_plus(data, k, &mut rng);
    Ok(lloyd(data, init, max_iter))
}

/// Lloyd iterations warm-started from `warm`.
pub fn retrain(data: &Matrix, warm: &Centroids, max_iter: usize) -> Result<KMeansFit, InductionError> {
    if warm.dim() != data.cols() {
        return Err(InductionError::Dimension {
            expected: data.cols(),
            actual: warm.dim(),
        });
    }
    if data.rows() == 0 {
        return Err(InductionError::NoData);
    }
    if warm.k() < 1 || warm.k() > data.rows() {
        return Err(InductionError::InvalidK {
            k: warm.k(),
            n: data.rows(),
        });
    }
    if max_iter < 1 {
        return Err(InductionError::InvalidMaxIter);
    }
    Ok(lloyd(data, warm.matrix.clone(), max_iter))
}

fn assign_all(data: &Matrix, centroids: &Matrix) -> Vec<usize> {
    data.iter_rows().map(|r| nearest(r, centroids).0).collect()
}

fn lloyd(data: &Matrix, mut centroids: Matrix, max_iter: usize) -> KMeansFit {
    let k = centroids.rows();
    let mut assignments = assign_all(data, &centroids);
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 0..max_iter {
        repair_empty(data, &centroids, &mut assignments, k);
        centroids = means_from_assignments(data, &assignments, k);
        trace.push(inertia(data, &assignments, &centroids));
        let next = assign_all(data, &centroids);
        if next == assignments {
            converged = true;
            break;
        }
        // Out of budget: keep the assignments the centroids were averaged from.
        if iter + 1 == max_iter {
            break;
        }
        assignments = next;
    }
    KMeansFit {
        partition: TopicPartition::new(assignments, k),
        centroids: Centroids::new(centroids),
        inertia_trace: trace,
        converged,
    }
}

/// Assigns every row to its nearest centroid, repairs empty clusters, and
/// returns the partition with its member means. A single Lloyd half-step.
pub fn reassign(data: &Matrix, centroids: &Centroids) -> Result<(TopicPartition, Centroids), InductionError> {
    if centroids.dim() != data.cols() {
        return Err(InductionError::Dimension {
            expected: data.cols(),
            actual: centroids.dim(),
        });
    }
    let k = centroids.k();
    if k < 1 || k > data.rows() {
        return Err(InductionError::InvalidK { k, n: data.rows() });
    }
    let mut assignments = assign_all(data, &centroids.matrix);
    repair_empty(data, &centroids.matrix, &mut assignments, k);
    let means = means_from_assignments(data, &assignments, k);
    Ok((TopicPartition::new(assignments, k), Centroids::new(means)))
}

/// Moves the point farthest from its centroid into each empty cluster, taking
/// only from clusters with more than one member.
fn repair_empty(data: &Matrix, centroids: &Matrix, assignments: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(data.row(i), centroids.row(a));
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
        }
    }
}

/// Per-topic member means. Empty topics get a zero row.
pub fn means_from_assignments(data: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, data.cols());
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = count as f64;
            for s in sums.row_mut(c) {
                *s /= inv;
            }
        }
    }
    sums
}

pub fn inertia(data: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| squared_distance(data.row(i), centroids.row(a)))
        .sum()
}
