//! Rolling leader/lagger momentum strategy.
//!
//! Each day `t` the trailing `l`-day window ending at `t` is ranked by a
//! lead-lag detector. The top `leader_fraction` of the ranking forms the
//! leader basket, the rest the lagger basket. The sign of an EWMA of the
//! leaders' mean return over the last `p` days is then applied to each
//! basket's mean return on day `t + δ`.

mod metrics;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    ewma, max_drawdown, mean, performance_metrics, performance_report, rescale_pnl, sample_std, sharpe_significance,
    sharpe_statistic, BacktestReport, PnLSeries, ANNUALIZATION,
};

use crate::cluster::KMeansParams;
use crate::error::{Error, Result};
use crate::leadlag::{ccf_lead_lag_matrix, detect, rowsum_rank, DetectConfig, Method};
use crate::matrix::SquareMatrix;
use crate::panel::TimeSeriesPanel;
use crate::rng::derive_seed;

/// Lead-lag estimator used for ranking inside the strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyMethod {
    Ccf,
    Cluster(Method),
}

impl StrategyMethod {
    pub const ALL: [StrategyMethod; 5] = [
        StrategyMethod::Ccf,
        StrategyMethod::Cluster(Method::KmMod),
        StrategyMethod::Cluster(Method::KmMed),
        StrategyMethod::Cluster(Method::SpMod),
        StrategyMethod::Cluster(Method::SpMed),
    ];
}

impl fmt::Display for StrategyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyMethod::Ccf => f.write_str("CCF"),
            StrategyMethod::Cluster(m) => m.fmt(f),
        }
    }
}

impl FromStr for StrategyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("ccf") {
            Ok(StrategyMethod::Ccf)
        } else {
            s.parse().map(StrategyMethod::Cluster)
        }
    }
}

impl TryFrom<String> for StrategyMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyMethod> for String {
    fn from(m: StrategyMethod) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Length of the trailing window each ranking is estimated on.
    pub window_length: usize,
    pub q: usize,
    pub s: usize,
    pub k_clusters: usize,
    pub theta: u64,
    pub method: StrategyMethod,
    /// Share of series, by rank, in the leader basket.
    pub leader_fraction: f64,
    /// EWMA lookback `p`.
    pub lookback: usize,
    /// Holding horizon `δ`.
    pub horizon: usize,
    pub seed: u64,
    /// Maximum lag of the CCF estimator.
    pub ccf_max_lag: usize,
    pub target_vol: f64,
    pub kmeans: KMeansParams,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            window_length: 21,
            q: 10,
            s: 1,
            k_clusters: 11,
            theta: 6,
            method: StrategyMethod::Cluster(Method::KmMod),
            leader_fraction: 0.8,
            lookback: 3,
            horizon: 1,
            seed: 0,
            ccf_max_lag: 5,
            target_vol: 0.15,
            kmeans: KMeansParams::default(),
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.leader_fraction > 0.0 && self.leader_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "leader fraction {} must lie in (0, 1)",
                self.leader_fraction
            )));
        }
        if self.q == 0 || self.q >= self.window_length {
            return Err(Error::InvalidParameter(format!(
                "window length q = {} must satisfy 0 < q < l = {}",
                self.q, self.window_length
            )));
        }
        if self.lookback == 0 || self.horizon == 0 || self.s == 0 {
            return Err(Error::InvalidParameter("lookback, horizon and shift must be at least 1".into()));
        }
        if self.lookback >= self.window_length {
            return Err(Error::InvalidParameter(format!(
                "lookback {} must be shorter than the window length {}",
                self.lookback, self.window_length
            )));
        }
        if !(self.target_vol > 0.0) {
            return Err(Error::InvalidParameter("target volatility must be positive".into()));
        }
        Ok(())
    }

    fn detect_config(&self, method: Method, seed: u64) -> DetectConfig {
        DetectConfig {
            q: self.q,
            s: self.s,
            k_clusters: self.k_clusters,
            method,
            theta: self.theta,
            seed,
            kmeans: self.kmeans,
            ..DetectConfig::default()
        }
    }
}

/// Number of series in the leader basket.
pub fn leader_count(n: usize, leader_fraction: f64) -> usize {
    (leader_fraction * n as f64 + 1e-9).floor() as usize
}

/// Leader and lagger PnL, aligned by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutput {
    pub laggers: PnLSeries,
    pub leaders: PnLSeries,
}

fn basket_mean(panel: &TimeSeriesPanel, basket: &[usize], t: usize) -> f64 {
    basket.iter().map(|&i| panel.value(i, t)).sum::<f64>() / basket.len() as f64
}

fn rank_window(window: &TimeSeriesPanel, cfg: &StrategyConfig, seed: u64) -> Result<Vec<usize>> {
    let scores: SquareMatrix<f64> = match cfg.method {
        StrategyMethod::Ccf => ccf_lead_lag_matrix(window, cfg.ccf_max_lag)?.scores,
        StrategyMethod::Cluster(m) => detect(window, &cfg.detect_config(m, seed))?.as_real(),
    };
    Ok(rowsum_rank(&scores, window.ids())?.into_iter().map(|e| e.index).collect())
}

/// One trading day: `(pnl of laggers, pnl of leaders)` realized at `t0 + δ`.
fn trade_day(panel: &TimeSeriesPanel, cfg: &StrategyConfig, t0: usize) -> Result<(f64, f64)> {
    let l = cfg.window_length;
    let window = panel.slice_time(t0 + 1 - l, t0 + 1)?;
    let order = rank_window(&window, cfg, derive_seed(cfg.seed, t0 as u64))?;
    let n_lead = leader_count(order.len(), cfg.leader_fraction);
    let (leaders, laggers) = order.split_at(n_lead);
    let signal_days: Vec<f64> = (t0 - cfg.lookback..=t0).map(|t| basket_mean(panel, leaders, t)).collect();
    let position = ewma(&signal_days, cfg.lookback)?;
    let sign = if position > 0.0 {
        1.0
    } else if position < 0.0 {
        -1.0
    } else {
        0.0
    };
    let t = t0 + cfg.horizon;
    Ok((sign * basket_mean(panel, laggers, t), sign * basket_mean(panel, leaders, t)))
}

/// Runs the strategy over every day with a full trailing window and a
/// realized horizon, in parallel across days.
pub fn run_strategy(panel: &TimeSeriesPanel, cfg: &StrategyConfig) -> Result<StrategyOutput> {
    cfg.validate()?;
    let (n, t_len) = (panel.n_series(), panel.len());
    let n_lead = leader_count(n, cfg.leader_fraction);
    if n_lead == 0 || n_lead == n {
        return Err(Error::InvalidParameter(format!(
            "leader fraction {} splits {n} series into an empty basket",
            cfg.leader_fraction
        )));
    }
    if t_len < cfg.window_length + cfg.horizon {
        return Err(Error::InvalidInput(format!(
            "panel of length {t_len} is shorter than window {} plus horizon {}",
            cfg.window_length, cfg.horizon
        )));
    }
    let days: Vec<usize> = (cfg.window_length - 1..t_len - cfg.horizon).collect();
    let pnl: Vec<(f64, f64)> = days
        .par_iter()
        .map(|&t0| trade_day(panel, cfg, t0))
        .collect::<Result<_>>()?;
    let dates: Vec<String> = days.iter().map(|&t0| panel.times()[t0 + cfg.horizon].clone()).collect();
    let (lag_raw, lead_raw): (Vec<f64>, Vec<f64>) = pnl.into_iter().unzip();
    Ok(StrategyOutput {
        laggers: PnLSeries::new(dates.clone(), lag_raw, cfg.target_vol)?,
        leaders: PnLSeries::new(dates, lead_raw, cfg.target_vol)?,
    })
}

/// Parameter lists whose cross product a grid run evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub methods: Vec<StrategyMethod>,
    pub lookbacks: Vec<usize>,
    pub horizons: Vec<usize>,
    pub leader_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basket {
    Laggers,
    Leaders,
}

impl fmt::Display for Basket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basket::Laggers => "laggers",
            Basket::Leaders => "leaders",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub method: StrategyMethod,
    pub lookback: usize,
    pub horizon: usize,
    pub leader_fraction: f64,
    pub basket: Basket,
    pub report: BacktestReport,
}

/// Runs every grid point on top of `base`, in grid order.
pub fn run_grid(panel: &TimeSeriesPanel, base: &StrategyConfig, grid: &GridSpec) -> Result<Vec<GridRecord>> {
    let mut points = Vec::new();
    for &method in &grid.methods {
        for &lookback in &grid.lookbacks {
            for &horizon in &grid.horizons {
                for &leader_fraction in &grid.leader_fractions {
                    points.push(StrategyConfig {
                        method,
                        lookback,
                        horizon,
                        leader_fraction,
                        ..base.clone()
                    });
                }
            }
        }
    }
    let runs: Vec<Vec<GridRecord>> = points
        .par_iter()
        .map(|cfg| {
            let out = run_strategy(panel, cfg)?;
            let record = |basket, pnl: &PnLSeries| -> Result<GridRecord> {
                Ok(GridRecord {
                    method: cfg.method,
                    lookback: cfg.lookback,
                    horizon: cfg.horizon,
                    leader_fraction: cfg.leader_fraction,
                    basket,
                    report: performance_report(pnl)?,
                })
            };
            Ok(vec![record(Basket::Laggers, &out.laggers)?, record(Basket::Leaders, &out.leaders)?])
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}
