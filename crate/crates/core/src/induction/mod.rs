//! Centroid-based topic induction over document embeddings.

mod kmeans;
mod projection;

pub use kmeans::{inertia, kmeans_fit, kmeans_plus_plus, means_from_assignments, reassign, retrain, KMeansFit};
pub use projection::{project_2d, Projection};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{squared_distance, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum InductionError {
    #[error("k = {k} is outside [1, {n}]")]
    InvalidK { k: usize, n: usize },
    #[error("max_iter must be at least 1")]
    InvalidMaxIter,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("projection needs at least 2 embedding dimensions, got {0}")]
    ProjectionDim(usize),
    #[error("no data points")]
    NoData,
}

/// Hard assignment of documents to topics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopicPartition {
    assignments: Vec<usize>,
    k: usize,
    cluster_sizes: Vec<usize>,
}

impl TopicPartition {
    /// Panics if any assignment is `>= k`.
    pub fn new(assignments: Vec<usize>, k: usize) -> Self {
        let mut cluster_sizes = vec![0; k];
        for &a in &assignments {
            cluster_sizes[a] += 1;
        }
        Self {
            assignments,
            k,
            cluster_sizes,
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn members(&self, topic: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == topic)
            .map(|(i, _)| i)
    }

    pub fn has_empty_cluster(&self) -> bool {
        self.cluster_sizes.contains(&0)
    }
}

/// Topic centroids, one row per topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub matrix: Matrix,
}

impl Centroids {
    pub fn new(matrix: Matrix) -> Self {
        Self { matrix }
    }

    pub fn k(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.matrix.row(k)
    }
}

/// Index of the nearest centroid by squared Euclidean distance; ties go to the
/// lowest index.
pub fn assign(z: &[f64], centroids: &Centroids) -> Result<usize, InductionError> {
    if z.len() != centroids.dim() {
        return Err(InductionError::Dimension {
            expected: centroids.dim(),
            actual: z.len(),
        });
    }
    if centroids.k() == 0 {
        return Err(InductionError::NoData);
    }
    Ok(nearest(z, &centroids.matrix).0)
}

pub(crate) fn nearest(z: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter_rows().enumerate() {
        let d = squared_distance(z, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Partition export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionExport {
    pub k: usize,
    pub assignments: Vec<(String, usize)>,
    pub inertia: f64,
    pub seed: u64,
    pub init: String,
}

impl PartitionExport {
    pub fn new(ids: &[String], partition: &TopicPartition, inertia: f64, seed: u64) -> Self {
        Self {
            k: partition.k(),
            assignments: ids.iter().cloned().zip(partition.assignments().iter().copied()).collect(),
            inertia,
            seed,
            init: "kmeans++".into(),
        }
    }
}
