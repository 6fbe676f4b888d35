//! From cluster assignments to pairwise lag estimates.
//!
//! Every cluster that holds windows of two different series `i < j` votes
//! for the relative lags `start_j - start_i` of all such window pairs. The
//! pooled lags per pair form a multiset; its size is the vote count, pairs
//! with fewer than `theta` votes are discarded, and the surviving pairs get
//! the mode or lower median of their multiset as the lag estimate. A
//! positive entry `gamma[i][j]` means series `i` leads series `j` by that
//! many steps.

pub mod ccf;
pub mod rank;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_pp, spectral, ClusterAssignment, KMeansParams, SpectralParams};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::panel::{extract_subsequences, SubsequenceUniverse, TimeSeriesPanel};
use crate::similarity::{default_knn, gaussian_kernel, knn_graph};

pub use ccf::{ccf, ccf_lead_lag_matrix, CcfMatrix};
pub use rank::{rowsum_rank, RankEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Clustering {
    KMeans,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    Mode,
    Median,
}

/// Clustering family combined with the lag aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "KM_Mod")]
    KmMod,
    #[serde(rename = "KM_Med")]
    KmMed,
    #[serde(rename = "SP_Mod")]
    SpMod,
    #[serde(rename = "SP_Med")]
    SpMed,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::KmMod, Method::KmMed, Method::SpMod, Method::SpMed];

    pub fn clustering(self) -> Clustering {
        match self {
            Method::KmMod | Method::KmMed => Clustering::KMeans,
            Method::SpMod | Method::SpMed => Clustering::Spectral,
        }
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            Method::KmMod | Method::SpMod => Aggregation::Mode,
            Method::KmMed | Method::SpMed => Aggregation::Median,
        }
    }

    pub fn from_parts(clustering: Clustering, aggregation: Aggregation) -> Self {
        match (clustering, aggregation) {
            (Clustering::KMeans, Aggregation::Mode) => Method::KmMod,
            (Clustering::KMeans, Aggregation::Median) => Method::KmMed,
            (Clustering::Spectral, Aggregation::Mode) => Method::SpMod,
            (Clustering::Spectral, Aggregation::Median) => Method::SpMed,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::KmMod => "KM_Mod",
            Method::KmMed => "KM_Med",
            Method::SpMod => "SP_Mod",
            Method::SpMed => "SP_Med",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "KM_MOD" => Ok(Method::KmMod),
            "KM_MED" => Ok(Method::KmMed),
            "SP_MOD" => Ok(Method::SpMod),
            "SP_MED" => Ok(Method::SpMed),
            _ => Err(Error::InvalidParameter(format!(
                "unknown method `{s}` (expected KM_Mod, KM_Med, SP_Mod or SP_Med)"
            ))),
        }
    }
}

/// Pooled relative lags for every series pair `i < j`, stored as sorted
/// `(lag, count)` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMultiset {
    n: usize,
    offsets: Vec<usize>,
    runs: Vec<(i64, u64)>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl LagMultiset {
    /// Builds from raw `(i, j, lag)` observations; pairs must satisfy `i < j`.
    pub fn from_observations(n: usize, observations: impl IntoIterator<Item = (usize, usize, i64)>) -> Result<Self> {
        let mut keyed = Vec::new();
        for (i, j, lag) in observations {
            if !(i < j && j < n) {
                return Err(Error::InvalidParameter(format!(
                    "lag observation for pair ({i}, {j}) outside i < j < {n}"
                )));
            }
            keyed.push((pair_index(n, i, j), lag));
        }
        Ok(Self::from_keyed(n, keyed))
    }

    fn from_keyed(n: usize, mut keyed: Vec<(usize, i64)>) -> Self {
        keyed.sort_unstable();
        let pairs = n * n.saturating_sub(1) / 2;
        let mut offsets = vec![0usize; pairs + 1];
        let mut runs: Vec<(i64, u64)> = Vec::new();
        let mut cursor = 0;
        for p in 0..pairs {
            offsets[p] = runs.len();
            while cursor < keyed.len() && keyed[cursor].0 == p {
                let lag = keyed[cursor].1;
                let in_pair = runs.len() > offsets[p];
                match runs.last_mut() {
                    Some(last) if in_pair && last.0 == lag => last.1 += 1,
                    _ => runs.push((lag, 1)),
                }
                cursor += 1;
            }
        }
        offsets[pairs] = runs.len();
        Self { n, offsets, runs }
    }

    pub fn n_series(&self) -> usize {
        self.n
    }

    /// Sorted `(lag, count)` runs for the unordered pair `{i, j}`, expressed
    /// with `i < j`.
    pub fn pair(&self, i: usize, j: usize) -> &[(i64, u64)] {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if a == b {
            return &[];
        }
        let p = pair_index(self.n, a, b);
        &self.runs[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn size(&self, i: usize, j: usize) -> u64 {
        self.pair(i, j).iter().map(|r| r.1).sum()
    }

    /// Every lag of the pair, sorted ascending, with repetitions.
    pub fn expanded(&self, i: usize, j: usize) -> Vec<i64> {
        self.pair(i, j)
            .iter()
            .flat_map(|&(lag, c)| std::iter::repeat(lag).take(c as usize))
            .collect()
    }

    /// `(i, j, lag, count)` for every stored run, pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, i64, u64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).flat_map(move |j| self.pair(i, j).iter().map(move |&(l, c)| (i, j, l, c)))
        })
    }
}

/// Pools the relative lags of co-clustered windows from distinct series.
pub fn pair_lag_multisets(assignment: &ClusterAssignment, universe: &SubsequenceUniverse) -> Result<LagMultiset> {
    if assignment.len() != universe.len() {
        return Err(Error::Dimension(format!(
            "assignment has {} labels but universe has {} rows",
            assignment.len(),
            universe.len()
        )));
    }
    let n = universe.n_series();
    let origin = universe.origin();
    let mut keyed = Vec::new();
    for members in assignment.members() {
        // (series, start) sorted by series
        let mut items: Vec<(usize, i64)> = members
            .iter()
            .map(|&r| (origin[r].series, origin[r].start as i64))
            .collect();
        items.sort_unstable();
        for a in 0..items.len() {
            for b in (a + 1)..items.len() {
                let (si, start_i) = items[a];
                let (sj, start_j) = items[b];
                if si != sj {
                    keyed.push((pair_index(n, si, sj), start_j - start_i));
                }
            }
        }
    }
    Ok(LagMultiset::from_keyed(n, keyed))
}

/// Per-pair vote counts after thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingMatrix {
    pub counts: SquareMatrix<u64>,
    pub theta: u64,
}

pub fn voting_matrix(multisets: &LagMultiset, theta: u64) -> Result<VotingMatrix> {
    if theta == 0 {
        return Err(Error::InvalidParameter("voting threshold must be at least 1".into()));
    }
    let n = multisets.n_series();
    let mut counts = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let size = multisets.size(i, j);
            if size >= theta {
                counts.set(i, j, size);
                counts.set(j, i, size);
            }
        }
    }
    Ok(VotingMatrix { counts, theta })
}

/// Mode or lower median of a multiset given as sorted `(value, count)` runs.
/// Mode ties go to the smallest absolute value, then the smaller value.
pub fn aggregate_runs(runs: &[(i64, u64)], method: Aggregation) -> Option<i64> {
    let total: u64 = runs.iter().map(|r| r.1).sum();
    if total == 0 {
        return None;
    }
    match method {
        Aggregation::Mode => runs
            .iter()
            .filter(|r| r.1 > 0)
            .min_by(|a, b| b.1.cmp(&a.1).then(a.0.abs().cmp(&b.0.abs())).then(a.0.cmp(&b.0)))
            .map(|r| r.0),
        Aggregation::Median => {
            let target = (total - 1) / 2;
            let mut seen = 0;
            for &(v, c) in runs {
                seen += c;
                if seen > target {
                    return Some(v);
                }
            }
            None
        }
    }
}

pub fn aggregate_lag(multiset: &[i64], method: Aggregation) -> Option<i64> {
    let mut sorted = multiset.to_vec();
    sorted.sort_unstable();
    let mut runs: Vec<(i64, u64)> = Vec::new();
    for v in sorted {
        match runs.last_mut() {
            Some(last) if last.0 == v => last.1 += 1,
            _ => runs.push((v, 1)),
        }
    }
    aggregate_runs(&runs, method)
}

/// Antisymmetric integer lag matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadLagMatrix {
    pub gamma: SquareMatrix<i64>,
    pub ids: Vec<String>,
}

impl LeadLagMatrix {
    pub fn n(&self) -> usize {
        self.gamma.n()
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::Dimension(format!("{} ids for a {}-series matrix", ids.len(), self.n())));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn as_real(&self) -> SquareMatrix<f64> {
        self.gamma.map(|v| v as f64)
    }
}

fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

pub fn lead_lag_matrix(multisets: &LagMultiset, votes: &VotingMatrix, method: Aggregation) -> Result<LeadLagMatrix> {
    let n = multisets.n_series();
    if votes.counts.n() != n {
        return Err(Error::Dimension(format!(
            "voting matrix is {}x{} but multisets cover {n} series",
            votes.counts.n(),
            votes.counts.n()
        )));
    }
    let mut gamma = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if votes.counts.get(i, j) != 0 {
                if let Some(lag) = aggregate_runs(multisets.pair(i, j), method) {
                    gamma.set(i, j, lag);
                    gamma.set(j, i, -lag);
                }
            }
        }
    }
    Ok(LeadLagMatrix {
        gamma,
        ids: default_ids(n),
    })
}

/// Parameters of one detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Window length.
    pub q: usize,
    /// Window shift.
    pub s: usize,
    /// Number of clusters.
    pub k_clusters: usize,
    pub method: Method,
    pub theta: u64,
    pub seed: u64,
    /// KNN neighbour count for the spectral graph; `None` means `ceil(sqrt(N))`.
    pub knn: Option<usize>,
    /// Gaussian kernel width; `None` means `1 / N`.
    pub kernel_sigma: Option<f64>,
    /// Standardize each window before clustering.
    pub standardize: bool,
    pub kmeans: KMeansParams,
    pub isolated_fallback: bool,
    pub dense_limit: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            q: 10,
            s: 1,
            k_clusters: 11,
            method: Method::KmMod,
            theta: 6,
            seed: 0,
            knn: None,
            kernel_sigma: None,
            standardize: false,
            kmeans: KMeansParams::default(),
            isolated_fallback: false,
            dense_limit: 5000,
        }
    }
}

impl DetectConfig {
    pub fn spectral_params(&self) -> SpectralParams {
        SpectralParams {
            kmeans: self.kmeans,
            isolated_fallback: self.isolated_fallback,
            dense_limit: self.dense_limit,
            ..SpectralParams::default()
        }
    }
}

/// Clusters the universe with the family named by `clustering`.
pub fn cluster_universe(
    universe: &SubsequenceUniverse,
    clustering: Clustering,
    cfg: &DetectConfig,
) -> Result<ClusterAssignment> {
    let standardized;
    let universe = if cfg.standardize {
        standardized = universe.standardized();
        &standardized
    } else {
        universe
    };
    match clustering {
        Clustering::KMeans => kmeans_pp(universe, cfg.k_clusters, cfg.seed, &cfg.kmeans),
        Clustering::Spectral => {
            let k_nn = cfg.knn.unwrap_or_else(|| default_knn(universe.len()));
            let graph = knn_graph(universe, k_nn)?;
            let weighted = gaussian_kernel(&graph, universe, cfg.kernel_sigma)?;
            spectral(&weighted, cfg.k_clusters, cfg.seed, &cfg.spectral_params())
        }
    }
}

/// Every intermediate product of a detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub universe: SubsequenceUniverse,
    pub assignment: ClusterAssignment,
    pub multisets: LagMultiset,
    pub votes: VotingMatrix,
    pub lead_lag: LeadLagMatrix,
}

pub fn detect_detailed(panel: &TimeSeriesPanel, cfg: &DetectConfig) -> Result<Detection> {
    let universe = extract_subsequences(panel, cfg.q, cfg.s)?;
    let assignment = cluster_universe(&universe, cfg.method.clustering(), cfg)?;
    let multisets = pair_lag_multisets(&assignment, &universe)?;
    let votes = voting_matrix(&multisets, cfg.theta)?;
    let lead_lag = lead_lag_matrix(&multisets, &votes, cfg.method.aggregation())?.with_ids(panel.ids().to_vec())?;
    Ok(Detection {
        universe,
        assignment,
        multisets,
        votes,
        lead_lag,
    })
}

/// Window extraction, clustering, lag pooling, voting and aggregation.
pub fn detect(panel: &TimeSeriesPanel, cfg: &DetectConfig) -> Result<LeadLagMatrix> {
    Ok(detect_detailed(panel, cfg)?.lead_lag)
}
