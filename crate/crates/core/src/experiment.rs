//! Monte-Carlo sweeps over noise level, voting threshold and method on
//! synthetic panels drawn from a preset design.
//!
//! Each repetition draws one panel per noise level from a seed that depends
//! only on `(master seed, repetition)`, so every noise level sees the same
//! factor and noise draws, scaled differently. Clustering happens once per
//! (panel, clustering family); thresholds and aggregation rules reuse it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::KMeansParams;
use crate::error::{Error, Result};
use crate::leadlag::{
    cluster_universe, lead_lag_matrix, pair_lag_multisets, voting_matrix, Clustering, DetectConfig, LeadLagMatrix,
    Method,
};
use crate::matrix::SquareMatrix;
use crate::panel::extract_subsequences;
use crate::rng::derive_seed;
use crate::simulate::{
    adjusted_rand_index, error_matrix, generate_panel, ground_truth, lag_mse_scoped, preset_design, true_labels,
    MseScope,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Number of factors of the preset design (1, 2 or 3).
    pub factors: usize,
    pub n: usize,
    pub t: usize,
    pub q: usize,
    pub s: usize,
    /// Cluster count; `None` means `11 * factors`.
    pub k_clusters: Option<usize>,
    pub sigmas: Vec<f64>,
    pub thetas: Vec<u64>,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
    pub scope: MseScope,
    pub knn: Option<usize>,
    pub kernel_sigma: Option<f64>,
    pub kmeans: KMeansParams,
}

impl SweepSpec {
    /// The small-panel setup: `n = 6`, `T = 100`, `q = 90`, `s = 1`, with ten
    /// k-means++ restarts.
    pub fn small(factors: usize) -> Self {
        Self {
            factors,
            n: 6,
            t: 100,
            q: 90,
            s: 1,
            k_clusters: None,
            sigmas: vec![1.0],
            thetas: vec![1, 6],
            methods: Method::ALL.to_vec(),
            repetitions: 1,
            seed: 0,
            scope: MseScope::Masked,
            knn: None,
            kernel_sigma: None,
            kmeans: KMeansParams {
                restarts: 10,
                ..KMeansParams::default()
            },
        }
    }

    pub fn clusters(&self) -> usize {
        self.k_clusters.unwrap_or(11 * self.factors)
    }

    pub fn setting(&self) -> String {
        format!("k{}_n{}", self.factors, self.n)
    }
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub setting: String,
    pub sigma: f64,
    pub theta: u64,
    pub method: Method,
    pub repetition: usize,
    pub mse: f64,
    pub ari: f64,
    /// Whether the error matrix was identically zero.
    pub exact: bool,
}

/// Estimates from one simulated panel for one method and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub method: Method,
    pub theta: u64,
    pub lead_lag: LeadLagMatrix,
    pub error: SquareMatrix<i64>,
    pub mse: f64,
    pub ari: f64,
}

/// Simulates repetition `rep` at noise level `sigma` and evaluates every
/// method and threshold of the sweep on it.
pub fn run_replicate(spec: &SweepSpec, sigma: f64, rep: usize) -> Result<Vec<Outcome>> {
    if spec.methods.is_empty() || spec.thetas.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one theta and method".into()));
    }
    let design = preset_design(spec.factors, spec.n)?;
    let truth = ground_truth(&design)?;
    let rep_seed = derive_seed(spec.seed, rep as u64);
    let panel = generate_panel(&design, spec.t, sigma, rep_seed)?;
    let universe = extract_subsequences(&panel, spec.q, spec.s)?;
    let labels = true_labels(&design, &universe)?;
    let cfg = DetectConfig {
        q: spec.q,
        s: spec.s,
        k_clusters: spec.clusters(),
        seed: derive_seed(rep_seed, 1),
        knn: spec.knn,
        kernel_sigma: spec.kernel_sigma,
        kmeans: spec.kmeans,
        ..DetectConfig::default()
    };
    let mut per_family = Vec::new();
    for family in [Clustering::KMeans, Clustering::Spectral] {
        if spec.methods.iter().any(|m| m.clustering() == family) {
            let assignment = cluster_universe(&universe, family, &cfg)?;
            let ari = adjusted_rand_index(&assignment.labels, &labels)?;
            let multisets = pair_lag_multisets(&assignment, &universe)?;
            per_family.push((family, ari, multisets));
        }
    }
    let mut out = Vec::with_capacity(spec.methods.len() * spec.thetas.len());
    for &method in &spec.methods {
        let (_, ari, multisets) = per_family
            .iter()
            .find(|(f, _, _)| *f == method.clustering())
            .expect("family clustered above");
        for &theta in &spec.thetas {
            let votes = voting_matrix(multisets, theta)?;
            let lead_lag = lead_lag_matrix(multisets, &votes, method.aggregation())?.with_ids(panel.ids().to_vec())?;
            let error = error_matrix(&lead_lag, &truth)?;
            out.push(Outcome {
                method,
                theta,
                mse: lag_mse_scoped(&error, &truth.mask, spec.scope)?,
                ari: *ari,
                lead_lag,
                error,
            });
        }
    }
    Ok(out)
}

/// Runs every (sigma, repetition) job in parallel and returns records in
/// sigma, repetition, method, theta order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    if spec.sigmas.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one sigma".into()));
    }
    let jobs: Vec<(f64, usize)> = spec
        .sigmas
        .iter()
        .flat_map(|&sigma| (0..spec.repetitions).map(move |r| (sigma, r)))
        .collect();
    let chunks: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(sigma, rep)| {
            Ok(run_replicate(spec, sigma, rep)?
                .into_iter()
                .map(|o| SweepRecord {
                    setting: spec.setting(),
                    sigma,
                    theta: o.theta,
                    method: o.method,
                    repetition: rep,
                    mse: o.mse,
                    ari: o.ari,
                    exact: o.error.count_nonzero() == 0,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Mean of `f` over the records matching `pred`.
pub fn mean_where(records: &[SweepRecord], pred: impl Fn(&SweepRecord) -> bool, f: impl Fn(&SweepRecord) -> f64) -> f64 {
    let (sum, n) = records
        .iter()
        .filter(|r| pred(r))
        .fold((0.0, 0usize), |(s, n), r| (s + f(r), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
