//! Pairwise similarity measures over windows, and the sparse KNN graph with
//! Gaussian-kernel weights that feeds spectral clustering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SubsequenceUniverse;

/// Kernel weights below this are clamped so that degrees stay positive.
pub const MIN_KERNEL_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    pub weight: f64,
}

/// Sparse weighted graph over the rows of a universe. Edges are kept sorted
/// by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    size: usize,
    edges: Vec<Edge>,
    symmetric: bool,
}

impl SimilarityGraph {
    /// Builds a graph from an edge list. Self-loops and weights outside
    /// `(0, 1]` are rejected; duplicate `(row, col)` entries keep the last
    /// weight.
    pub fn from_edges(size: usize, mut edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.row >= size || e.col >= size {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) outside graph of size {size}",
                    e.row, e.col
                )));
            }
            if e.row == e.col {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {}", e.row)));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge weight {} outside (0, 1]",
                    e.weight
                )));
            }
        }
        edges.sort_by(|a, b| (a.row, a.col).cmp(&(b.row, b.col)));
        edges.dedup_by(|later, earlier| {
            if later.row == earlier.row && later.col == earlier.col {
                earlier.weight = later.weight;
                true
            } else {
                false
            }
        });
        let symmetric = is_symmetric(&edges);
        Ok(Self {
            size,
            edges,
            symmetric,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.size];
        for e in &self.edges {
            d[e.row] += e.weight;
        }
        d
    }
}

fn is_symmetric(sorted: &[Edge]) -> bool {
    sorted.iter().all(|e| {
        sorted
            .binary_search_by(|x| (x.row, x.col).cmp(&(e.col, e.row)))
            .map(|k| sorted[k].weight == e.weight)
            .unwrap_or(false)
    })
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn double_centered(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (x[i] - x[j]).abs();
        }
    }
    let row_mean: Vec<f64> = d.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // distance matrix is symmetric, so column means equal row means
            d[i * n + j] += grand - row_mean[i] - row_mean[j];
        }
    }
    d
}

/// Biased sample distance correlation. Returns 0 when either series is
/// constant.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("distance correlation needs at least two points".into()));
    }
    let a = double_centered(x);
    let b = double_centered(y);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let dcov_xy = dot(&a, &b);
    let dvar_x = dot(&a, &a);
    let dvar_y = dot(&b, &b);
    if dvar_x <= 0.0 || dvar_y <= 0.0 {
        return Ok(0.0);
    }
    let r2 = dcov_xy / (dvar_x * dvar_y).sqrt();
    Ok(r2.max(0.0).sqrt().min(1.0))
}

/// Which dense similarity to tabulate for a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatmapMeasure {
    Pearson,
    DistanceCorrelation,
}

/// Dense `N x N` similarity of every pair of windows. Pairs involving a
/// constant window get 0 under Pearson.
pub fn similarity_heatmap(universe: &SubsequenceUniverse, measure: HeatmapMeasure) -> Vec<Vec<f64>> {
    let n = universe.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (a, b) = (universe.window(i), universe.window(j));
                    match measure {
                        HeatmapMeasure::Pearson => pearson(a, b).unwrap_or(0.0),
                        HeatmapMeasure::DistanceCorrelation => distance_correlation(a, b).unwrap_or(0.0),
                    }
                })
                .collect()
        })
        .collect()
}

/// Default neighbour count, `ceil(sqrt(N))`, capped below `N`.
pub fn default_knn(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Directed `k_nn`-nearest-neighbour edges under Euclidean distance,
/// symmetrized by union. Ties go to the lower row index. All weights are 1.
pub fn knn_graph(universe: &SubsequenceUniverse, k_nn: usize) -> Result<SimilarityGraph> {
    let n = universe.len();
    if k_nn == 0 || k_nn >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbour count {k_nn} must lie in 1..{n}"
        )));
    }
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let wi = universe.window(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(wi, universe.window(j)), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k_nn - 1, cmp);
            cand.truncate(k_nn);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut edges = Vec::with_capacity(2 * n * k_nn);
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            edges.push(Edge { row: i, col: j, weight: 1.0 });
            edges.push(Edge { row: j, col: i, weight: 1.0 });
        }
    }
    SimilarityGraph::from_edges(n, edges)
}

/// Reweights every edge to `exp(-d^2 / (2 sigma^2))`, clamped below at
/// [`MIN_KERNEL_WEIGHT`]. `sigma_kernel = None` means `1 / N`.
pub fn gaussian_kernel(
    graph: &SimilarityGraph,
    universe: &SubsequenceUniverse,
    sigma_kernel: Option<f64>,
) -> Result<SimilarityGraph> {
    if graph.size() != universe.len() {
        return Err(Error::Dimension(format!(
            "graph has {} vertices but universe has {} rows",
            graph.size(),
            universe.len()
        )));
    }
    let sigma = sigma_kernel.unwrap_or(1.0 / universe.len() as f64);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("kernel width must be positive, got {sigma}")));
    }
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let d2 = squared_distance(universe.window(e.row), universe.window(e.col));
            Edge {
                weight: kernel_weight(d2, sigma),
                ..*e
            }
        })
        .collect();
    Ok(SimilarityGraph {
        size: graph.size,
        edges,
        symmetric: graph.symmetric,
    })
}

pub fn kernel_weight(squared_distance: f64, sigma: f64) -> f64 {
    (-squared_distance / (2.0 * sigma * sigma)).exp().clamp(MIN_KERNEL_WEIGHT, 1.0)
}
