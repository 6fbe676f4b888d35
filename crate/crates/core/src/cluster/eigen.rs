//! Leading eigenpairs of a sparse symmetric matrix by restarted block Krylov
//! iteration with Rayleigh-Ritz extraction. Used for spectral embeddings too
//! large for a dense decomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets already sorted by row.
    pub fn from_sorted_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut indptr = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            indptr[r + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            *yi = self.indices[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] += self.values[k];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthogonalizes `v` against `basis` (two Gram-Schmidt passes) and
/// normalizes it. Returns `None` when `v` is numerically in the span.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> Option<()> {
    let before = dot(v, v).sqrt();
    if before == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = dot(v, v).sqrt();
    if norm <= 1e-10 * before {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(())
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `n x k`, one eigenvector per column.
    pub vectors: DMatrix<f64>,
    pub max_residual: f64,
}

/// The `k` algebraically largest eigenpairs of the symmetric operator `a`.
pub fn top_eigenpairs(a: &CsrMatrix, k: usize, seed: u64, tol: f64, max_restarts: usize) -> Result<EigenPairs> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let dim = n.min(4 * k + 32);
    let mut rng = rng_from_seed(seed);
    let mut random_vec = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };

    let mut start: Vec<Vec<f64>> = (0..k).map(|_| random_vec(n)).collect();
    let mut last_residual = f64::INFINITY;
    for _ in 0..max_restarts.max(1) {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut block: Vec<Vec<f64>> = Vec::new();
        for mut v in start.drain(..) {
            if basis.len() < dim && orthonormalize(&mut v, &basis).is_some() {
                basis.push(v.clone());
                block.push(v);
            }
        }
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(dim);
        while basis.len() < dim {
            let mut next = Vec::with_capacity(block.len());
            for v in &block {
                let mut w = vec![0.0; n];
                a.matvec(v, &mut w);
                images.push(w.clone());
                if basis.len() < dim && orthonormalize(&mut w, &basis).is_some() {
                    basis.push(w.clone());
                    next.push(w);
                }
            }
            if next.is_empty() {
                // Krylov space exhausted; pad with fresh random directions.
                let mut tries = 0;
                while next.is_empty() && tries < 8 {
                    let mut w = random_vec(n);
                    if orthonormalize(&mut w, &basis).is_some() {
                        basis.push(w.clone());
                        next.push(w);
                    }
                    tries += 1;
                }
                if next.is_empty() {
                    break;
                }
            }
            block = next;
        }
        // images only cover part of the basis; recompute all for Rayleigh-Ritz
        images.clear();
        for v in &basis {
            let mut w = vec![0.0; n];
            a.matvec(v, &mut w);
            images.push(w);
        }
        let m = basis.len();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let take = k.min(m);
        let mut values = Vec::with_capacity(take);
        let mut vectors = DMatrix::zeros(n, take);
        let mut residual = 0.0f64;
        let mut ritz_vectors = Vec::with_capacity(take);
        for (c, &idx) in order.iter().take(take).enumerate() {
            let theta = eig.eigenvalues[idx];
            let s = eig.eigenvectors.column(idx);
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            for (j, sj) in s.iter().enumerate() {
                for r in 0..n {
                    x[r] += sj * basis[j][r];
                    ax[r] += sj * images[j][r];
                }
            }
            let res = ax.iter().zip(&x).map(|(p, q)| (p - theta * q).powi(2)).sum::<f64>().sqrt();
            residual = residual.max(res);
            for r in 0..n {
                vectors[(r, c)] = x[r];
            }
            values.push(theta);
            ritz_vectors.push(x);
        }
        last_residual = residual;
        if take == k && residual <= tol {
            return Ok(EigenPairs {
                values,
                vectors,
                max_residual: residual,
            });
        }
        start = ritz_vectors;
    }
    Err(Error::NoConvergence(format!(
        "block Krylov residual {last_residual:.3e} above tolerance {tol:.1e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_on_random_symmetric() {
        let n = 120;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (i * 31 + j * 17) % 11 == 0 || (j * 31 + i * 17) % 11 == 0 {
                    let v = ((i.min(j) * 7 + i.max(j) * 3) % 13) as f64 / 13.0;
                    trip.push((i, j, v));
                }
            }
        }
        let a = CsrMatrix::from_sorted_triplets(n, &trip);
        let dense = SymmetricEigen::new(a.to_dense());
        let mut expected: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        expected.sort_by(|x, y| y.total_cmp(x));
        let got = top_eigenpairs(&a, 5, 1, 1e-9, 200).unwrap();
        for (g, e) in got.values.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
    }
}
