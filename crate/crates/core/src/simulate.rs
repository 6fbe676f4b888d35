//! Synthetic panels from the lagged multi-factor model
//! `X_i[t] = sum_j B_ij f_j[t - L_ij] + sigma * eps_i[t]`, the preset
//! single-membership designs, and recovery scores (error matrix, lag MSE,
//! adjusted Rand index).

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leadlag::LeadLagMatrix;
use crate::matrix::SquareMatrix;
use crate::panel::{SubsequenceUniverse, TimeSeriesPanel};
use crate::rng::rng_from_seed;

/// Loadings `B` (`n x k`) and integer lags `L` (`n x k`) of a lagged factor
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorDesign {
    n: usize,
    k: usize,
    loadings: Vec<f64>,
    lags: Vec<usize>,
    max_lag: usize,
}

impl FactorDesign {
    pub fn new(loadings: Vec<Vec<f64>>, lags: Vec<Vec<usize>>, max_lag: usize) -> Result<Self> {
        let n = loadings.len();
        let k = loadings.first().map_or(0, Vec::len);
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter("design needs at least one series and one factor".into()));
        }
        if lags.len() != n || loadings.iter().any(|r| r.len() != k) || lags.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("loading and lag matrices must both be n x k".into()));
        }
        for (i, (b, l)) in loadings.iter().zip(&lags).enumerate() {
            for j in 0..k {
                if !b[j].is_finite() {
                    return Err(Error::NonFinite(format!("loading ({i}, {j})")));
                }
                if l[j] > max_lag {
                    return Err(Error::InvalidParameter(format!(
                        "lag {} at ({i}, {j}) exceeds maximum lag {max_lag}",
                        l[j]
                    )));
                }
                if b[j] == 0.0 && l[j] != 0 {
                    return Err(Error::InvalidParameter(format!("nonzero lag at zero loading ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            n,
            k,
            loadings: loadings.into_iter().flatten().collect(),
            lags: lags.into_iter().flatten().collect(),
            max_lag,
        })
    }

    pub fn n_series(&self) -> usize {
        self.n
    }

    pub fn n_factors(&self) -> usize {
        self.k
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn loading(&self, i: usize, j: usize) -> f64 {
        self.loadings[i * self.k + j]
    }

    pub fn lag(&self, i: usize, j: usize) -> usize {
        self.lags[i * self.k + j]
    }

    pub fn is_single_membership(&self) -> bool {
        (0..self.n).all(|i| (0..self.k).filter(|&j| self.loading(i, j) != 0.0).count() == 1)
    }

    /// Factor each series loads on, for single-membership designs.
    pub fn membership(&self) -> Result<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let mut nz = (0..self.k).filter(|&j| self.loading(i, j) != 0.0);
                match (nz.next(), nz.next()) {
                    (Some(j), None) => Ok(j),
                    _ => Err(Error::UnsupportedModel(format!(
                        "series {i} does not load on exactly one factor"
                    ))),
                }
            })
            .collect()
    }
}

/// Block designs with `k` in {1, 2, 3}: `n / k` consecutive series load on
/// each factor with unit loading; within a block the lags cycle through
/// (0..=5), (0, 2, 4) or (0, 3) respectively. Maximum lag 5.
pub fn preset_design(k: usize, n: usize) -> Result<FactorDesign> {
    let pattern: &[usize] = match k {
        1 => &[0, 1, 2, 3, 4, 5],
        2 => &[0, 2, 4],
        3 => &[0, 3],
        _ => return Err(Error::InvalidParameter(format!("preset designs exist for k in 1..=3, got {k}"))),
    };
    if n == 0 || n % k != 0 {
        return Err(Error::InvalidParameter(format!("series count {n} must be a positive multiple of {k}")));
    }
    let block = n / k;
    let mut loadings = vec![vec![0.0; k]; n];
    let mut lags = vec![vec![0usize; k]; n];
    for i in 0..n {
        let f = i / block;
        loadings[i][f] = 1.0;
        lags[i][f] = pattern[(i % block) % pattern.len()];
    }
    FactorDesign::new(loadings, lags, 5)
}

/// Draws one panel of length `t`. Factors are unit-variance Gaussian paths
/// of length `t + M`, read with offset `M` so every lagged index exists;
/// noise is Gaussian with standard deviation `sigma`.
pub fn generate_panel(design: &FactorDesign, t: usize, sigma: f64, seed: u64) -> Result<TimeSeriesPanel> {
    let m = design.max_lag();
    if t <= m {
        return Err(Error::InvalidParameter(format!("length {t} must exceed the maximum lag {m}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {sigma}")));
    }
    let mut rng = rng_from_seed(seed);
    let factors: Vec<Vec<f64>> = (0..design.n_factors())
        .map(|_| (0..t + m).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let rows = (0..design.n_series())
        .map(|i| {
            (0..t)
                .map(|time| {
                    let signal: f64 = (0..design.n_factors())
                        .filter(|&j| design.loading(i, j) != 0.0)
                        .map(|j| design.loading(i, j) * factors[j][time + m - design.lag(i, j)])
                        .sum();
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    signal + sigma * eps
                })
                .collect()
        })
        .collect();
    TimeSeriesPanel::from_rows(rows)
}

/// True pairwise lags and the mask of pairs that share a factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub psi: SquareMatrix<i64>,
    pub mask: SquareMatrix<bool>,
}

/// `psi[i][j] = L[j][f] - L[i][f]` for series sharing factor `f`; zero and
/// unmasked elsewhere.
pub fn ground_truth(design: &FactorDesign) -> Result<GroundTruth> {
    let member = design.membership()?;
    let n = design.n_series();
    let mask = SquareMatrix::from_fn(n, |i, j| member[i] == member[j]);
    let psi = SquareMatrix::from_fn(n, |i, j| {
        if member[i] == member[j] {
            design.lag(j, member[j]) as i64 - design.lag(i, member[i]) as i64
        } else {
            0
        }
    });
    Ok(GroundTruth { psi, mask })
}

pub fn error_matrix(gamma: &LeadLagMatrix, truth: &GroundTruth) -> Result<SquareMatrix<i64>> {
    let n = gamma.n();
    if truth.psi.n() != n {
        return Err(Error::Dimension(format!("estimate is {n}x{n} but truth is {0}x{0}", truth.psi.n())));
    }
    Ok(SquareMatrix::from_fn(n, |i, j| gamma.gamma.get(i, j) - truth.psi.get(i, j)))
}

/// Which pairs enter the lag MSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MseScope {
    /// Strict upper-triangular pairs sharing a factor.
    Masked,
    /// Every strict upper-triangular pair.
    AllPairs,
}

/// Mean of `E[i][j]^2` over masked pairs `i < j`.
pub fn lag_mse(e: &SquareMatrix<i64>, mask: &SquareMatrix<bool>) -> Result<f64> {
    lag_mse_scoped(e, mask, MseScope::Masked)
}

pub fn lag_mse_scoped(e: &SquareMatrix<i64>, mask: &SquareMatrix<bool>, scope: MseScope) -> Result<f64> {
    let n = e.n();
    if mask.n() != n {
        return Err(Error::Dimension(format!("error is {n}x{n} but mask is {0}x{0}", mask.n())));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            if scope == MseScope::AllPairs || mask.get(i, j) {
                sum += (e.get(i, j) as f64).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::UndefinedStatistic("no pairs selected for the lag MSE".into()));
    }
    Ok(sum / count as f64)
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Pair-counting adjusted Rand index with the expected-index correction.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("labelings of length {} and {}", a.len(), b.len())));
    }
    let n = a.len() as u64;
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Reference clustering of a universe drawn from `design`: windows get the
/// same label exactly when they load on the same factor and cover the same
/// stretch of it (`start - L` equal).
pub fn true_labels(design: &FactorDesign, universe: &SubsequenceUniverse) -> Result<Vec<usize>> {
    let member = design.membership()?;
    if universe.n_series() != design.n_series() {
        return Err(Error::Dimension(format!(
            "universe has {} series but design has {}",
            universe.n_series(),
            design.n_series()
        )));
    }
    let mut ids: HashMap<(usize, i64), usize> = HashMap::new();
    Ok(universe
        .origin()
        .iter()
        .map(|o| {
            let f = member[o.series];
            let key = (f, o.start as i64 - design.lag(o.series, f) as i64);
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::extract_subsequences;

    #[test]
    fn preset_homogeneous() {
        let d = preset_design(1, 6).unwrap();
        assert!((0..6).all(|i| d.loading(i, 0) == 1.0));
        assert_eq!((0..6).map(|i| d.lag(i, 0)).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(d.max_lag(), 5);
    }

    #[test]
    fn preset_two_factors() {
        let d = preset_design(2, 6).unwrap();
        assert_eq!((0..6).map(|i| d.lag(i, 0)).collect::<Vec<_>>(), vec![0, 2, 4, 0, 0, 0]);
        assert_eq!((0..6).map(|i| d.lag(i, 1)).collect::<Vec<_>>(), vec![0, 0, 0, 0, 2, 4]);
        assert_eq!((0..6).map(|i| d.loading(i, 0)).collect::<Vec<_>>(), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn preset_three_factors() {
        let d = preset_design(3, 6).unwrap();
        for f in 0..3 {
            assert_eq!(d.loading(2 * f, f), 1.0);
            assert_eq!(d.loading(2 * f + 1, f), 1.0);
            assert_eq!(d.lag(2 * f, f), 0);
            assert_eq!(d.lag(2 * f + 1, f), 3);
        }
        assert!(preset_design(4, 8).is_err());
        assert!(preset_design(2, 7).is_err());
    }

    #[test]
    fn preset_large_repeats_block_pattern() {
        let d = preset_design(1, 60).unwrap();
        assert_eq!(d.lag(6, 0), 0);
        assert_eq!(d.lag(59, 0), 5);
        let d = preset_design(3, 60).unwrap();
        assert_eq!(d.loading(19, 0), 1.0);
        assert_eq!(d.loading(20, 1), 1.0);
        assert_eq!((20..24).map(|i| d.lag(i, 1)).collect::<Vec<_>>(), vec![0, 3, 0, 3]);
    }

    #[test]
    fn noiseless_shift() {
        let d = FactorDesign::new(vec![vec![1.0], vec![1.0]], vec![vec![0], vec![1]], 1).unwrap();
        let p = generate_panel(&d, 50, 0.0, 3).unwrap();
        for t in 1..50 {
            assert_eq!(p.value(1, t), p.value(0, t - 1));
        }
        assert!(generate_panel(&d, 1, 0.0, 3).is_err());
    }

    #[test]
    fn deterministic_and_shaped() {
        let d = preset_design(2, 6).unwrap();
        let a = generate_panel(&d, 100, 1.0, 42).unwrap();
        let b = generate_panel(&d, 100, 1.0, 42).unwrap();
        assert_eq!((a.n_series(), a.len()), (6, 100));
        assert!(a.rows().zip(b.rows()).all(|(x, y)| x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits())));
    }

    #[test]
    fn truth_values() {
        let t = ground_truth(&preset_design(1, 6).unwrap()).unwrap();
        assert_eq!(t.psi.get(1, 2), 1);
        assert_eq!(t.psi.get(0, 5), 5);
        assert!(t.psi.is_antisymmetric());
        let t = ground_truth(&preset_design(2, 6).unwrap()).unwrap();
        for i in 0..3 {
            for j in 3..6 {
                assert_eq!(t.psi.get(i, j), 0);
                assert!(!t.mask.get(i, j));
            }
        }
        assert_eq!(t.psi.get(3, 5), 4);
        let mixed = FactorDesign::new(vec![vec![1.0, 1.0]], vec![vec![0, 0]], 0).unwrap();
        assert!(matches!(ground_truth(&mixed), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn error_and_mse() {
        let truth = ground_truth(&preset_design(1, 6).unwrap()).unwrap();
        let mut g = truth.psi.clone();
        let lm = LeadLagMatrix {
            gamma: g.clone(),
            ids: vec![String::new(); 6],
        };
        let e = error_matrix(&lm, &truth).unwrap();
        assert_eq!(e.count_nonzero(), 0);
        assert_eq!(lag_mse(&e, &truth.mask).unwrap(), 0.0);

        g.set(1, 2, 2);
        g.set(2, 1, -2);
        let ids = vec![String::new(); 6];
        let e = error_matrix(&LeadLagMatrix { gamma: g, ids: ids.clone() }, &truth).unwrap();
        assert_eq!(e.get(1, 2), 1);
        assert!((lag_mse(&e, &truth.mask).unwrap() - 1.0 / 15.0).abs() < 1e-15);

        let pair = |v: i64| SquareMatrix::from_fn(6, |i, j| match (i, j) {
            (1, 2) => v,
            (2, 1) => -v,
            _ => 0,
        });
        let t3 = GroundTruth {
            psi: pair(3),
            mask: truth.mask.clone(),
        };
        let e = error_matrix(&LeadLagMatrix { gamma: pair(2), ids }, &t3).unwrap();
        assert_eq!(e.get(1, 2), -1);

        let empty = SquareMatrix::from_fn(6, |_, _| false);
        assert!(matches!(lag_mse(&e, &empty), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn ari_examples() {
        let a = [0, 0, 1, 1];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[1, 1, 0, 0]).unwrap(), 1.0);
        // [0,0,1,1] vs [0,1,0,1]: every contingency cell holds one item, so
        // index = 0, both marginal sums are 2, expected = 2*2/6, max = 2.
        let expected = (0.0 - 4.0 / 6.0) / (2.0 - 4.0 / 6.0);
        assert!((adjusted_rand_index(&a, &[0, 1, 0, 1]).unwrap() - expected).abs() < 1e-15);
        assert!(adjusted_rand_index(&a, &[0, 1]).is_err());
    }

    #[test]
    fn labels_align_shifted_windows() {
        let d = FactorDesign::new(vec![vec![1.0], vec![1.0]], vec![vec![0], vec![1]], 1).unwrap();
        let p = generate_panel(&d, 20, 0.0, 1).unwrap();
        let u = extract_subsequences(&p, 5, 1).unwrap();
        let labels = true_labels(&d, &u).unwrap();
        let find = |s: usize, z: usize| u.origin().iter().position(|o| o.series == s && o.start == z).unwrap();
        assert_eq!(labels[find(0, 4)], labels[find(1, 5)]);
        assert_ne!(labels[find(0, 4)], labels[find(1, 4)]);
    }

    #[test]
    fn labels_separate_factors() {
        let d = preset_design(2, 6).unwrap();
        let p = generate_panel(&d, 30, 1.0, 1).unwrap();
        let u = extract_subsequences(&p, 20, 1).unwrap();
        let labels = true_labels(&d, &u).unwrap();
        let member = d.membership().unwrap();
        for r in 0..u.len() {
            for s in 0..u.len() {
                if labels[r] == labels[s] {
                    assert_eq!(member[u.origin()[r].series], member[u.origin()[s].series]);
                }
            }
        }
        let distinct: std::collections::HashSet<_> = labels.iter().collect();
        assert!(distinct.len() <= 2 * (u.per_series() + d.max_lag()));
    }
}
