//! Panels of aligned series, the subsequence universe built from them, and
//! the elementary return transforms shared by the rest of the crate.
//!
//! A panel holds `n` series of common length `T`. Sliding a window of length
//! `q` with shift `s` over every series yields `h = (T - q) / s + 1` windows
//! per series; stacking them gives the `N x q` universe, `N = n * h`, which is
//! what the clustering step operates on.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n x T` matrix of aligned real-valued series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    ids: Vec<String>,
    times: Vec<String>,
    values: Vec<f64>,
}

impl TimeSeriesPanel {
    /// Builds a panel from one row per series. Rejects ragged rows, duplicate
    /// ids and non-finite values.
    pub fn new(ids: Vec<String>, times: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::EmptyPanel("panel has no series".into()));
        }
        let t = times.len();
        if t == 0 {
            return Err(Error::EmptyPanel("panel has no time steps".into()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut values = Vec::with_capacity(rows.len() * t);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != t {
                return Err(Error::Dimension(format!(
                    "series `{id}` has length {} but the panel has {t} time labels",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("series `{id}`")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { ids, times, values })
    }

    /// Panel with generated ids `X1..Xn` and integer time labels `0..T`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        let ids = (1..=n).map(|i| format!("X{i}")).collect();
        let times = (0..t).map(|i| i.to_string()).collect();
        Self::new(ids, times, rows)
    }

    pub fn n_series(&self) -> usize {
        self.ids.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let t = self.len();
        &self.values[i * t..(i + 1) * t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.len())
    }

    pub fn value(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.len() + t]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Columns `start..end` of every series.
    pub fn slice_time(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "time slice {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        let rows = self.rows().map(|r| r[start..end].to_vec()).collect();
        Self::new(self.ids.clone(), self.times[start..end].to_vec(), rows)
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows = self.rows().map(&mut f).collect();
        Self::new(self.ids.clone(), self.times.clone(), rows)
    }
}

/// Position of one window inside the panel it was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub series: usize,
    /// 0-based start index into the series.
    pub start: usize,
}

/// The `N x q` stack of every window of every series.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsequenceUniverse {
    windows: Vec<f64>,
    origin: Vec<WindowOrigin>,
    q: usize,
    s: usize,
    per_series: usize,
    n_series: usize,
    series_len: usize,
}

impl SubsequenceUniverse {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.q
    }

    pub fn shift(&self) -> usize {
        self.s
    }

    /// Windows per series (`h`).
    pub fn per_series(&self) -> usize {
        self.per_series
    }

    pub fn n_series(&self) -> usize {
        self.n_series
    }

    /// Length `T` of the series the windows were cut from.
    pub fn series_len(&self) -> usize {
        self.series_len
    }

    pub fn window(&self, r: usize) -> &[f64] {
        &self.windows[r * self.q..(r + 1) * self.q]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f64]> {
        self.windows.chunks(self.q)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.windows
    }

    pub fn origin(&self) -> &[WindowOrigin] {
        &self.origin
    }

    /// Copy of the universe with every window rescaled to zero mean and unit
    /// variance. Constant windows are centred only.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        for w in out.windows.chunks_mut(self.q) {
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let sd = var.sqrt();
            for v in w.iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        out
    }

    /// Builds a universe directly from windows and their provenance. Used by
    /// tests and by callers that assemble universes by hand.
    pub fn from_parts(
        windows: Vec<Vec<f64>>,
        origin: Vec<WindowOrigin>,
        n_series: usize,
        series_len: usize,
    ) -> Result<Self> {
        if windows.len() != origin.len() || windows.is_empty() {
            return Err(Error::Dimension("windows and origins must be nonempty and match".into()));
        }
        let q = windows[0].len();
        if q == 0 || windows.iter().any(|w| w.len() != q) {
            return Err(Error::Dimension("all windows must share one positive length".into()));
        }
        if origin.iter().any(|o| o.series >= n_series || o.start + q > series_len) {
            return Err(Error::InvalidParameter("window origin out of range".into()));
        }
        let per_series = (0..n_series)
            .map(|i| origin.iter().filter(|o| o.series == i).count())
            .max()
            .unwrap_or(0);
        Ok(Self {
            windows: windows.into_iter().flatten().collect(),
            origin,
            q,
            s: 1,
            per_series,
            n_series,
            series_len,
        })
    }
}

/// Cuts every series of `panel` into windows of length `q` advanced by `s`.
/// When `T - q` is not a multiple of `s` the trailing remainder is dropped.
pub fn extract_subsequences(panel: &TimeSeriesPanel, q: usize, s: usize) -> Result<SubsequenceUniverse> {
    if q == 0 || s == 0 {
        return Err(Error::InvalidParameter(format!(
            "window length and shift must be positive (q={q}, s={s})"
        )));
    }
    let t = panel.len();
    if q > t {
        return Err(Error::InvalidWindow(format!("window length {q} exceeds series length {t}")));
    }
    let h = (t - q) / s + 1;
    let n = panel.n_series();
    let mut windows = Vec::with_capacity(n * h * q);
    let mut origin = Vec::with_capacity(n * h);
    for (i, row) in panel.rows().enumerate() {
        for z in 0..h {
            let start = z * s;
            windows.extend_from_slice(&row[start..start + q]);
            origin.push(WindowOrigin { series: i, start });
        }
    }
    Ok(SubsequenceUniverse {
        windows,
        origin,
        q,
        s,
        per_series: h,
        n_series: n,
        series_len: t,
    })
}

/// Winsorization bound and optional market series used to form excess returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    pub winsor_bound: f64,
    pub market_id: Option<String>,
}

impl ReturnConfig {
    pub fn new(winsor_bound: f64, market_id: Option<String>) -> Result<Self> {
        if !(winsor_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "winsor bound must be positive, got {winsor_bound}"
            )));
        }
        Ok(Self {
            winsor_bound,
            market_id,
        })
    }
}

impl Default for ReturnConfig {
    fn default() -> Self {
        Self {
            winsor_bound: 0.15,
            market_id: None,
        }
    }
}

pub fn winsorize(x: &[f64], bound: f64) -> Vec<f64> {
    x.iter().map(|v| v.clamp(-bound, bound)).collect()
}

pub fn excess_returns(panel: &TimeSeriesPanel, market: &[f64]) -> Result<TimeSeriesPanel> {
    if market.len() != panel.len() {
        return Err(Error::Dimension(format!(
            "market series has length {} but panel has {}",
            market.len(),
            panel.len()
        )));
    }
    panel.map_rows(|row| row.iter().zip(market).map(|(a, m)| a - m).collect())
}

pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("log return of nonpositive price {p}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}
