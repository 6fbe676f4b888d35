use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Trading days per year.
pub const ANNUALIZATION: f64 = 252.0;

/// Exponentially weighted average of the last `p + 1` observations with
/// smoothing `2 / (p + 1)`, normalized by the total weight so that the
/// recursion effectively starts at the first observation used.
pub fn ewma(x: &[f64], p: usize) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidInput("EWMA of an empty series".into()));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("EWMA lookback must be positive".into()));
    }
    let alpha = 2.0 / (p as f64 + 1.0);
    let tail = &x[x.len().saturating_sub(p + 1)..];
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = 1.0;
    for &v in tail.iter().rev() {
        num += w * v;
        den += w;
        w *= 1.0 - alpha;
    }
    Ok(num / den)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Scales a daily PnL series so its annualized volatility equals `target_vol`.
pub fn rescale_pnl(raw: &[f64], target_vol: f64) -> Result<Vec<f64>> {
    if !(target_vol > 0.0 && target_vol.is_finite()) {
        return Err(Error::InvalidParameter(format!("target volatility {target_vol} must be positive")));
    }
    if raw.len() < 2 {
        return Err(Error::DegeneratePnl("need at least two days to estimate volatility".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PnL series".into()));
    }
    let sd = sample_std(raw);
    if !(sd > 0.0) {
        return Err(Error::DegeneratePnl("PnL has zero variance".into()));
    }
    let k = target_vol / (sd * ANNUALIZATION.sqrt());
    Ok(raw.iter().map(|v| v * k).collect())
}

/// Daily PnL of one basket, before and after volatility targeting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnLSeries {
    pub dates: Vec<String>,
    pub raw: Vec<f64>,
    pub rescaled: Vec<f64>,
    pub target_vol: f64,
}

impl PnLSeries {
    pub fn new(dates: Vec<String>, raw: Vec<f64>, target_vol: f64) -> Result<Self> {
        if dates.len() != raw.len() {
            return Err(Error::Dimension(format!("{} dates for {} PnL values", dates.len(), raw.len())));
        }
        let rescaled = rescale_pnl(&raw, target_vol)?;
        Ok(Self {
            dates,
            raw,
            rescaled,
            target_vol,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Running sum of the rescaled PnL.
    pub fn cumulative(&self) -> Vec<f64> {
        self.rescaled
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}

/// Performance summary of a rescaled daily PnL series. Ratios that are
/// undefined for the given series are `None`; the accessors turn that into
/// an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub e_returns: f64,
    pub volatility: f64,
    pub downside_deviation: f64,
    pub max_drawdown: f64,
    pub sortino: Option<f64>,
    pub calmar: Option<f64>,
    pub hit_rate: f64,
    pub avg_profit_over_avg_loss: Option<f64>,
    /// Mean daily PnL in basis points.
    pub pnl_per_trade: f64,
    pub sharpe: f64,
    pub sharpe_stat: f64,
    pub p_value: f64,
}

impl BacktestReport {
    pub fn sortino(&self) -> Result<f64> {
        self.sortino
            .ok_or_else(|| Error::UndefinedMetric("Sortino ratio: no losing days".into()))
    }

    pub fn calmar(&self) -> Result<f64> {
        self.calmar
            .ok_or_else(|| Error::UndefinedMetric("Calmar ratio: zero drawdown".into()))
    }

    pub fn avg_profit_over_avg_loss(&self) -> Result<f64> {
        self.avg_profit_over_avg_loss
            .ok_or_else(|| Error::UndefinedMetric("avg profit / avg loss: needs both winning and losing days".into()))
    }
}

/// Most negative distance of the cumulative PnL below its running peak,
/// with the peak starting at zero.
pub fn max_drawdown(pnl: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut peak = 0.0f64;
    let mut worst = 0.0f64;
    for v in pnl {
        cum += v;
        peak = peak.max(cum);
        worst = worst.min(cum - peak);
    }
    worst
}

/// Metrics of an already rescaled daily PnL series.
pub fn performance_metrics(pnl: &[f64]) -> Result<BacktestReport> {
    if pnl.len() < 4 {
        return Err(Error::InvalidInput(format!("{} days is too short for a report", pnl.len())));
    }
    if pnl.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PnL series".into()));
    }
    let n = pnl.len() as f64;
    let m = mean(pnl);
    let sd = sample_std(pnl);
    if !(sd > 0.0) {
        return Err(Error::DegeneratePnl("PnL has zero variance".into()));
    }
    let ann = ANNUALIZATION.sqrt();
    let e_returns = m * ANNUALIZATION;
    let downside_deviation = ann * (pnl.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    let mdd = max_drawdown(pnl);
    let wins: Vec<f64> = pnl.iter().copied().filter(|v| *v > 0.0).collect();
    let losses: Vec<f64> = pnl.iter().copied().filter(|v| *v < 0.0).collect();
    let avg_pl = if wins.is_empty() || losses.is_empty() {
        None
    } else {
        Some(mean(&wins) / mean(&losses).abs())
    };
    let (sharpe_stat, p_value) = sharpe_significance(pnl)?;
    Ok(BacktestReport {
        e_returns,
        volatility: sd * ann,
        downside_deviation,
        max_drawdown: mdd,
        sortino: (downside_deviation > 0.0).then(|| e_returns / downside_deviation),
        calmar: (mdd < 0.0).then(|| e_returns / mdd.abs()),
        hit_rate: wins.len() as f64 / n,
        avg_profit_over_avg_loss: avg_pl,
        pnl_per_trade: m * 1e4,
        sharpe: m / sd * ann,
        sharpe_stat,
        p_value,
    })
}

pub fn performance_report(pnl: &PnLSeries) -> Result<BacktestReport> {
    performance_metrics(&pnl.rescaled)
}

/// Test statistic from a daily Sharpe ratio, sample size, skewness and raw
/// (non-excess) kurtosis.
pub fn sharpe_statistic(sr: f64, t: usize, skew: f64, kurt: f64) -> Result<f64> {
    let disc = 1.0 - skew * sr + (kurt - 1.0) * sr * sr / 4.0;
    if !(disc > 0.0) {
        return Err(Error::NumericDomain(format!("Sharpe test denominator {disc} is not positive")));
    }
    Ok(sr * ((t - 1) as f64).sqrt() / disc.sqrt())
}

/// Statistic and two-sided normal p-value for the null of a zero Sharpe
/// ratio, adjusted for skewness and kurtosis of the daily PnL.
pub fn sharpe_significance(pnl: &[f64]) -> Result<(f64, f64)> {
    let t = pnl.len();
    if t < 4 {
        return Err(Error::InvalidInput(format!("{t} days is too short for the Sharpe test")));
    }
    let m = mean(pnl);
    let sd = sample_std(pnl);
    if !(sd > 0.0) {
        return Err(Error::DegeneratePnl("PnL has zero variance".into()));
    }
    let moment = |k: i32| pnl.iter().map(|v| (v - m).powi(k)).sum::<f64>() / t as f64;
    let m2 = moment(2);
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2);
    let z = sharpe_statistic(m / sd, t, skew, kurt)?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0);
    Ok((z, p))
}
