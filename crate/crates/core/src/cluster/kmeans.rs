use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::similarity::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Stop once no center moves farther than this (Euclidean).
    pub tol: f64,
    /// Independent seedings; the lowest-inertia run wins.
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            restarts: 1,
        }
    }
}

/// Full result of one k-means run.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub assignment: ClusterAssignment,
    /// `k x dim`, row-major.
    pub centers: Vec<f64>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

/// Row-major point set view.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// D^2-weighted seeding: the first center is uniform, each later one is drawn
/// with probability proportional to its squared distance to the nearest
/// chosen center. When every remaining distance is zero the next center is
/// drawn uniformly.
pub fn plus_plus_init<R: Rng>(points: Points<'_>, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len();
    let dim = points.dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centers.extend_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 && total.is_finite() {
            WeightedIndex::new(&nearest)
                .map(|w| w.sample(rng))
                .unwrap_or_else(|_| rng.gen_range(0..n))
        } else {
            rng.gen_range(0..n)
        };
        let c = points.row(next);
        centers.extend_from_slice(c);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), c));
        }
    }
    centers
}

fn assign(points: Points<'_>, centers: &[f64], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let dim = points.dim;
    let mut inertia = 0.0;
    for i in 0..points.len() {
        let p = points.row(i);
        let mut best = (f64::INFINITY, 0);
        for (c, center) in centers.chunks(dim).enumerate() {
            let d = squared_distance(p, center);
            if d < best.0 {
                best = (d, c);
            }
        }
        labels[i] = best.1;
        dists[i] = best.0;
        inertia += best.0;
    }
    inertia
}

fn lloyd(points: Points<'_>, k: usize, mut centers: Vec<f64>, params: &KMeansParams) -> KMeansFit {
    let n = points.len();
    let dim = points.dim;
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;
        history.push(assign(points, &centers, &mut labels, &mut dists));

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * dim..(labels[i] + 1) * dim].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut new_centers = centers.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    new_centers[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
        // Empty clusters take the point farthest from its current center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                if dists[far] > 0.0 {
                    let old = labels[far];
                    counts[old] -= 1;
                    counts[c] = 1;
                    labels[far] = c;
                    dists[far] = 0.0;
                    new_centers[c * dim..(c + 1) * dim].copy_from_slice(points.row(far));
                }
            }
        }
        let shift = centers
            .chunks(dim)
            .zip(new_centers.chunks(dim))
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = new_centers;
        if shift < params.tol {
            break;
        }
    }
    let inertia = assign(points, &centers, &mut labels, &mut dists);
    history.push(inertia);
    KMeansFit {
        assignment: ClusterAssignment {
            labels,
            k,
            inertia: Some(inertia),
        },
        centers,
        inertia_history: history,
        iterations,
    }
}

/// k-means++ seeding followed by Lloyd iterations on arbitrary points.
pub fn kmeans_points(points: Points<'_>, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansFit> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} must lie in 1..={n}"
        )));
    }
    if params.max_iter == 0 || !(params.tol >= 0.0) {
        return Err(Error::InvalidParameter("k-means needs max_iter >= 1 and tol >= 0".into()));
    }
    let restarts = params.restarts.max(1);
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts {
        let run_seed = if r == 0 { seed } else { derive_seed(seed, r as u64) };
        let mut rng = rng_from_seed(run_seed);
        let centers = plus_plus_init(points, k, &mut rng);
        let fit = lloyd(points, k, centers, params);
        let better = best.as_ref().map_or(true, |b| {
            fit.assignment.inertia.unwrap_or(f64::INFINITY) < b.assignment.inertia.unwrap_or(f64::INFINITY)
        });
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> Vec<f64> {
        rows.iter().flat_map(|r| r.iter().copied()).collect()
    }

    #[test]
    fn singleton_clusters_when_k_equals_n() {
        let data = pts(&[&[0.0, 1.0], &[3.0, 1.0], &[-2.0, 5.0], &[7.0, 7.0]]);
        let p = Points::new(&data, 2).unwrap();
        let fit = kmeans_points(p, 4, 3, &KMeansParams::default()).unwrap();
        let mut l = fit.assignment.labels.clone();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
        assert_eq!(fit.assignment.inertia, Some(0.0));
    }

    #[test]
    fn single_cluster_center_is_mean() {
        let data = pts(&[&[0.0, 1.0], &[3.0, 1.0], &[-2.0, 5.0], &[7.0, 9.0]]);
        let p = Points::new(&data, 2).unwrap();
        let fit = kmeans_points(p, 1, 11, &KMeansParams::default()).unwrap();
        assert!((fit.centers[0] - 2.0).abs() < 1e-12);
        assert!((fit.centers[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn inertia_never_increases() {
        let data: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let p = Points::new(&data, 2).unwrap();
        let fit = kmeans_points(p, 7, 5, &KMeansParams::default()).unwrap();
        for w in fit.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", fit.inertia_history);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let data = vec![0.0, 1.0];
        let p = Points::new(&data, 1).unwrap();
        assert!(kmeans_points(p, 3, 0, &KMeansParams::default()).is_err());
        assert!(kmeans_points(p, 0, 0, &KMeansParams::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let data: Vec<f64> = (0..120).map(|i| ((i * 31) % 17) as f64).collect();
        let p = Points::new(&data, 3).unwrap();
        let a = kmeans_points(p, 4, 9, &KMeansParams::default()).unwrap();
        let b = kmeans_points(p, 4, 9, &KMeansParams::default()).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let data = vec![1.0; 10];
        let p = Points::new(&data, 2).unwrap();
        let fit = kmeans_points(p, 5, 1, &KMeansParams::default()).unwrap();
        assert_eq!(fit.assignment.inertia, Some(0.0));
    }
}
