use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::eigen::{top_eigenpairs, CsrMatrix};
use super::kmeans::{kmeans_points, KMeansParams, Points};
use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::similarity::SimilarityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub kmeans: KMeansParams,
    /// Give zero-degree vertices a unit self-weight instead of failing.
    pub isolated_fallback: bool,
    /// Largest graph handled by a dense eigendecomposition.
    pub dense_limit: usize,
    /// Residual tolerance for the iterative solver.
    pub eigen_tol: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            kmeans: KMeansParams::default(),
            isolated_fallback: false,
            dense_limit: 5000,
            eigen_tol: 1e-8,
        }
    }
}

/// `D^{-1/2} W D^{-1/2}` as a sparse matrix. Weights are first divided by
/// the largest weight; the normalized matrix is invariant to that scaling and
/// it keeps clamped kernel weights away from underflow.
fn normalized_adjacency(graph: &SimilarityGraph, isolated_fallback: bool) -> Result<CsrMatrix> {
    if !graph.is_symmetric() {
        return Err(Error::InvalidParameter("spectral clustering needs a symmetric graph".into()));
    }
    let n = graph.size();
    let scale = graph.edges().iter().map(|e| e.weight).fold(0.0, f64::max);
    let mut triplets: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .map(|e| (e.row, e.col, if scale > 0.0 { e.weight / scale } else { e.weight }))
        .collect();
    let mut degree = vec![0.0; n];
    for &(r, _, w) in &triplets {
        degree[r] += w;
    }
    for (i, d) in degree.iter_mut().enumerate() {
        if *d == 0.0 {
            if !isolated_fallback {
                return Err(Error::DegenerateGraph(format!("vertex {i} has zero degree")));
            }
            triplets.push((i, i, 1.0));
            *d = 1.0;
        }
    }
    triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    for t in triplets.iter_mut() {
        t.2 *= inv_sqrt[t.0] * inv_sqrt[t.1];
    }
    Ok(CsrMatrix::from_sorted_triplets(n, &triplets))
}

/// Dense symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian(graph: &SimilarityGraph, isolated_fallback: bool) -> Result<DMatrix<f64>> {
    let a = normalized_adjacency(graph, isolated_fallback)?;
    Ok(DMatrix::identity(graph.size(), graph.size()) - a.to_dense())
}

/// Eigenvectors of the `k` smallest Laplacian eigenvalues, one row per
/// vertex, each row scaled to unit norm. Returned row-major `n x k`.
pub fn spectral_embedding(graph: &SimilarityGraph, k: usize, seed: u64, params: &SpectralParams) -> Result<Vec<f64>> {
    let n = graph.size();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("cluster count {k} must lie in 1..={n}")));
    }
    let adjacency = normalized_adjacency(graph, params.isolated_fallback)?;
    let vectors: DMatrix<f64> = if n <= params.dense_limit {
        let lap = DMatrix::identity(n, n) - adjacency.to_dense();
        let eig = SymmetricEigen::new(lap);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])])
    } else {
        // Smallest Laplacian eigenvalues are the largest of the adjacency.
        top_eigenpairs(&adjacency, k, derive_seed(seed, 0xE16E), params.eigen_tol, 300)?.vectors
    };
    let mut out = Vec::with_capacity(n * k);
    for r in 0..n {
        let row = vectors.row(r);
        let norm = row.norm();
        out.extend(row.iter().map(|v| if norm > 0.0 { v / norm } else { *v }));
    }
    Ok(out)
}

/// Normalized spectral clustering: embed, then k-means++ on embedded rows.
pub fn spectral(graph: &SimilarityGraph, k: usize, seed: u64, params: &SpectralParams) -> Result<ClusterAssignment> {
    let embedding = spectral_embedding(graph, k, seed, params)?;
    let points = Points::new(&embedding, k)?;
    let fit = kmeans_points(points, k, seed, &params.kmeans)?;
    Ok(ClusterAssignment {
        inertia: None,
        ..fit.assignment
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::Edge;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        let mut e = Vec::new();
        for &(a, b, w) in edges {
            e.push(Edge { row: a, col: b, weight: w });
            e.push(Edge { row: b, col: a, weight: w });
        }
        SimilarityGraph::from_edges(n, e).unwrap()
    }

    #[test]
    fn two_components_recovered() {
        let g = graph(
            6,
            &[(0, 1, 1.0), (1, 2, 0.5), (0, 2, 0.7), (3, 4, 1.0), (4, 5, 0.9), (3, 5, 0.2)],
        );
        let a = spectral(&g, 2, 4, &SpectralParams::default()).unwrap();
        assert_eq!(a.labels[0], a.labels[1]);
        assert_eq!(a.labels[1], a.labels[2]);
        assert_eq!(a.labels[3], a.labels[4]);
        assert_eq!(a.labels[4], a.labels[5]);
        assert_ne!(a.labels[0], a.labels[3]);
    }

    #[test]
    fn isolated_vertex() {
        let g = graph(3, &[(0, 1, 1.0)]);
        assert!(matches!(
            spectral(&g, 2, 0, &SpectralParams::default()),
            Err(Error::DegenerateGraph(_))
        ));
        let params = SpectralParams {
            isolated_fallback: true,
            ..Default::default()
        };
        let a = spectral(&g, 2, 0, &params).unwrap();
        assert_eq!(a.labels[0], a.labels[1]);
        assert_ne!(a.labels[0], a.labels[2]);
    }

    #[test]
    fn laplacian_is_psd_with_zero_bottom() {
        let g = graph(5, &[(0, 1, 0.3), (1, 2, 1.0), (2, 3, 0.25), (3, 4, 0.8), (0, 4, 0.1)]);
        let l = normalized_laplacian(&g, false).unwrap();
        assert!((&l - l.transpose()).abs().max() < 1e-15);
        let ev = SymmetricEigen::new(l).eigenvalues;
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-8);
        assert!(ev.iter().all(|&v| v > -1e-8));
    }

    #[test]
    fn iterative_path_matches_dense() {
        // ring of 4 dense blocks joined by weak links
        let mut edges = Vec::new();
        for b in 0..4 {
            for i in 0..10 {
                for j in (i + 1)..10 {
                    edges.push((b * 10 + i, b * 10 + j, 0.5 + ((i + j) % 3) as f64 * 0.2));
                }
            }
            edges.push((b * 10, ((b + 1) % 4) * 10 + 5, 0.01));
        }
        let g = graph(40, &edges);
        let dense = spectral(&g, 4, 2, &SpectralParams::default()).unwrap();
        let iterative = spectral(
            &g,
            4,
            2,
            &SpectralParams {
                dense_limit: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for a in [&dense, &iterative] {
            for b in 0..4 {
                let l = a.labels[b * 10];
                assert!(a.labels[b * 10..(b + 1) * 10].iter().all(|&x| x == l));
            }
        }
    }
}
