//! K-means++ and normalized spectral clustering over the subsequence universe.

pub mod eigen;
pub mod kmeans;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::panel::SubsequenceUniverse;

pub use kmeans::{kmeans_points, KMeansFit, KMeansParams, Points};
pub use spectral::{normalized_laplacian, spectral, spectral_embedding, SpectralParams};

/// Cluster label per universe row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Labels in `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Sum of squared distances to assigned centers (k-means only).
    pub inertia: Option<f64>,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Row indices grouped by label, each group in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (r, &l) in self.labels.iter().enumerate() {
            groups[l].push(r);
        }
        groups
    }
}

/// K-means++ on the raw rows of the universe.
pub fn kmeans_pp(
    universe: &SubsequenceUniverse,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<ClusterAssignment> {
    let points = Points::new(universe.as_flat(), universe.window_len())?;
    Ok(kmeans_points(points, k, seed, params)?.assignment)
}
