//! CSV loading and cleaning of vendor-style return and price panels.
//!
//! Zero is the missing marker throughout: empty cells and `NA`/`NaN`
//! tokens load as `0.0`, and the filters count exact zeros.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{log_returns, winsorize, TimeSeriesPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One row per date, one column per asset, first column the date.
    Wide,
    /// `(date, id, value)` triplets.
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            _ => Err(Error::InvalidParameter(format!("unknown layout {s:?}"))),
        }
    }
}

/// Unprocessed asset-by-date values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    ids: Vec<String>,
    dates: Vec<String>,
    /// One row per asset.
    values: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(ids: Vec<String>, dates: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != ids.len() {
            return Err(Error::Dimension(format!("{} ids for {} rows", ids.len(), values.len())));
        }
        if let Some(r) = values.iter().find(|r| r.len() != dates.len()) {
            return Err(Error::Dimension(format!("row of length {} for {} dates", r.len(), dates.len())));
        }
        let mut seen = HashMap::new();
        for id in &ids {
            if seen.insert(id.as_str(), ()).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let keys = DateKeys::new(&dates);
        if let Some(w) = (1..dates.len()).find(|&t| keys.cmp(t - 1, t) != Ordering::Less) {
            return Err(Error::NonMonotoneDates(format!("{} is not after {}", dates[w], dates[w - 1])));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raw table".into()));
        }
        Ok(Self { ids, dates, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn n_assets(&self) -> usize {
        self.ids.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// The table as a panel, without any cleaning.
    pub fn to_panel(&self) -> Result<TimeSeriesPanel> {
        TimeSeriesPanel::new(self.ids.clone(), self.dates.clone(), self.values.clone())
    }

    pub fn from_panel(panel: &TimeSeriesPanel) -> Result<Self> {
        Self::new(panel.ids().to_vec(), panel.times().to_vec(), panel.rows().map(<[f64]>::to_vec).collect())
    }
}

/// Sort keys for a date column: calendar dates when every label parses as
/// one, numbers when every label parses as a number, text otherwise.
enum DateKeys {
    Dates(Vec<NaiveDate>),
    Numbers(Vec<f64>),
    Text(Vec<String>),
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    ["%Y-%m-%d", "%Y%m%d", "%Y/%m/%d", "%d/%m/%Y"]
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s.trim(), f).ok())
}

impl DateKeys {
    fn new(labels: &[String]) -> Self {
        if let Some(d) = labels.iter().map(|s| parse_date(s)).collect::<Option<Vec<_>>>() {
            DateKeys::Dates(d)
        } else if let Some(x) = labels.iter().map(|s| s.trim().parse::<f64>().ok()).collect::<Option<Vec<_>>>() {
            DateKeys::Numbers(x)
        } else {
            DateKeys::Text(labels.to_vec())
        }
    }

    fn cmp(&self, a: usize, b: usize) -> Ordering {
        match self {
            DateKeys::Dates(d) => d[a].cmp(&d[b]),
            DateKeys::Numbers(x) => x[a].total_cmp(&x[b]),
            DateKeys::Text(s) => s[a].cmp(&s[b]),
        }
    }
}

fn parse_cell(s: &str, line: u64, column: &str) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(0.0);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("line {line}, column {column}: {t:?} is not a number")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn read_wide(reader: impl std::io::Read) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse("wide layout needs a date column and at least one asset".into()));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut values = vec![Vec::new(); ids.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("line {line}: {} fields, expected {}", rec.len(), header.len())));
        }
        dates.push(rec[0].to_string());
        for (i, row) in values.iter_mut().enumerate() {
            row.push(parse_cell(&rec[i + 1], line, &ids[i])?);
        }
    }
    RawTable::new(ids, dates, values)
}

/// Ids keep their order of first appearance; dates are sorted. Cells
/// absent from the file load as zero.
pub fn read_long(reader: impl std::io::Read) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.len() < 3 {
        return Err(Error::Parse("long layout needs date, id and value columns".into()));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut id_pos: HashMap<String, usize> = HashMap::new();
    let mut date_labels: Vec<String> = Vec::new();
    let mut date_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() < 3 {
            return Err(Error::Parse(format!("line {line}: expected date, id, value")));
        }
        let d = *date_pos.entry(rec[0].to_string()).or_insert_with(|| {
            date_labels.push(rec[0].to_string());
            date_labels.len() - 1
        });
        let i = *id_pos.entry(rec[1].to_string()).or_insert_with(|| {
            ids.push(rec[1].to_string());
            ids.len() - 1
        });
        let v = parse_cell(&rec[2], line, "value")?;
        if cells.insert((i, d), v).is_some() {
            return Err(Error::DuplicateKey(format!("({}, {}) at line {line}", &rec[0], &rec[1])));
        }
    }
    let keys = DateKeys::new(&date_labels);
    let mut order: Vec<usize> = (0..date_labels.len()).collect();
    order.sort_by(|&a, &b| keys.cmp(a, b));
    if let Some(w) = order.windows(2).find(|w| keys.cmp(w[0], w[1]) == Ordering::Equal) {
        return Err(Error::DuplicateKey(format!(
            "dates {:?} and {:?} denote the same day",
            date_labels[w[0]], date_labels[w[1]]
        )));
    }
    let values = (0..ids.len())
        .map(|i| order.iter().map(|&d| cells.get(&(i, d)).copied().unwrap_or(0.0)).collect())
        .collect();
    let dates = order.iter().map(|&d| date_labels[d].clone()).collect();
    RawTable::new(ids, dates, values)
}

pub fn load_csv(path: impl AsRef<Path>, layout: Layout) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = std::io::BufReader::new(file);
    match layout {
        Layout::Wide => read_wide(reader),
        Layout::Long => read_long(reader),
    }
}

/// Loads several files in parallel, preserving input order.
pub fn load_csvs<P: AsRef<Path> + Sync>(paths: &[P], layout: Layout) -> Result<Vec<RawTable>> {
    paths.par_iter().map(|p| load_csv(p, layout)).collect()
}

/// Writes a panel in the wide layout read by [`read_wide`].
pub fn write_wide(panel: &TimeSeriesPanel, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.ids().iter().cloned());
    w.write_record(&header)?;
    for (t, date) in panel.times().iter().enumerate() {
        let mut rec = vec![date.clone()];
        rec.extend((0..panel.n_series()).map(|i| panel.value(i, t).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropKind {
    Day,
    Asset,
}

/// One removed day or asset and the rule that removed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub kind: DropKind,
    /// Date label or asset id.
    pub key: String,
    pub rule: String,
    /// The statistic that crossed the threshold.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub panel: TimeSeriesPanel,
    pub drops: Vec<DropEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityParams {
    pub day_zero_frac: f64,
    pub asset_zero_frac: f64,
    pub winsor: f64,
}

impl Default for EquityParams {
    fn default() -> Self {
        Self {
            day_zero_frac: 0.10,
            asset_zero_frac: 0.50,
            winsor: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuturesParams {
    pub day_zero_frac: f64,
    pub max_zero_days: usize,
    pub winsor: f64,
}

impl Default for FuturesParams {
    fn default() -> Self {
        Self {
            day_zero_frac: 0.10,
            max_zero_days: 160,
            winsor: 0.15,
        }
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in [0, 1]")))
    }
}

fn check_winsor(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("winsor bound {v} must be positive")))
    }
}

/// Working copy of a table with the market series split off.
struct Split {
    ids: Vec<String>,
    dates: Vec<String>,
    rows: Vec<Vec<f64>>,
    market: Vec<f64>,
}

fn split_market(raw: &RawTable, market_id: &str) -> Result<Split> {
    let m = raw
        .index_of(market_id)
        .ok_or_else(|| Error::MissingSeries(format!("market series {market_id:?} not in input")))?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for i in (0..raw.n_assets()).filter(|&i| i != m) {
        ids.push(raw.ids[i].clone());
        rows.push(raw.values[i].clone());
    }
    if ids.is_empty() {
        return Err(Error::EmptyPanel("no assets besides the market series".into()));
    }
    Ok(Split {
        ids,
        dates: raw.dates.clone(),
        market: raw.values[m].clone(),
        rows,
    })
}

impl Split {
    /// Drops days on which more than `frac` of the assets are zero.
    fn drop_days(&mut self, frac: f64, rule: &str, log: &mut Vec<DropEntry>) {
        let n = self.rows.len() as f64;
        let keep: Vec<bool> = (0..self.dates.len())
            .map(|t| {
                let share = self.rows.iter().filter(|r| r[t] == 0.0).count() as f64 / n;
                if share > frac {
                    log.push(DropEntry {
                        kind: DropKind::Day,
                        key: self.dates[t].clone(),
                        rule: rule.to_string(),
                        value: share,
                    });
                }
                share <= frac
            })
            .collect();
        let filter = |v: &Vec<f64>| v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<f64>>();
        self.rows = self.rows.iter().map(filter).collect();
        self.market = filter(&self.market);
        self.dates = self.dates.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| d.clone()).collect();
    }

    /// Drops assets whose zero statistic exceeds `limit`.
    fn drop_assets(&mut self, stat: impl Fn(&[f64]) -> f64, limit: f64, rule: &str, log: &mut Vec<DropEntry>) {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (id, row) in self.ids.drain(..).zip(self.rows.drain(..)) {
            let v = stat(&row);
            if v > limit {
                log.push(DropEntry {
                    kind: DropKind::Asset,
                    key: id,
                    rule: rule.to_string(),
                    value: v,
                });
            } else {
                ids.push(id);
                rows.push(row);
            }
        }
        self.ids = ids;
        self.rows = rows;
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.rows.is_empty() {
            Err(Error::EmptyPanel("every asset was filtered out".into()))
        } else if self.dates.is_empty() {
            Err(Error::EmptyPanel("every day was filtered out".into()))
        } else {
            Ok(())
        }
    }

    fn excess_winsorized(self, winsor: f64) -> Result<TimeSeriesPanel> {
        let rows = self
            .rows
            .iter()
            .map(|r| winsorize(&r.iter().zip(&self.market).map(|(x, m)| x - m).collect::<Vec<_>>(), winsor))
            .collect();
        TimeSeriesPanel::new(self.ids, self.dates, rows)
    }
}

fn zero_share(row: &[f64]) -> f64 {
    row.iter().filter(|v| **v == 0.0).count() as f64 / row.len().max(1) as f64
}

/// Day filter, then asset filter, then market-excess returns clipped to
/// `±winsor`. Filters count only non-market assets; the market series is
/// never dropped and is excluded from the output.
pub fn preprocess_equity(raw: &RawTable, market_id: &str, params: &EquityParams) -> Result<Preprocessed> {
    check_fraction("day zero fraction", params.day_zero_frac)?;
    check_fraction("asset zero fraction", params.asset_zero_frac)?;
    check_winsor(params.winsor)?;
    let mut split = split_market(raw, market_id)?;
    let mut drops = Vec::new();
    split.drop_days(params.day_zero_frac, "day_zero_fraction", &mut drops);
    split.ensure_nonempty()?;
    split.drop_assets(zero_share, params.asset_zero_frac, "asset_zero_fraction", &mut drops);
    split.ensure_nonempty()?;
    Ok(Preprocessed {
        panel: split.excess_winsorized(params.winsor)?,
        drops,
    })
}

/// Replaces zeros by the last nonzero value, then leading zeros by the
/// first nonzero value.
pub fn fill_zeros(x: &[f64]) -> Result<Vec<f64>> {
    let first = x
        .iter()
        .copied()
        .find(|v| *v != 0.0)
        .ok_or_else(|| Error::Unfillable("series is entirely zero".into()))?;
    let mut last = first;
    Ok(x.iter()
        .map(|&v| {
            if v != 0.0 {
                last = v;
            }
            last
        })
        .collect())
}

/// Day filter and asset filter on zero prices, zero filling, log returns,
/// then the equity excess-return and winsorizing steps.
pub fn preprocess_futures(raw: &RawTable, market_id: &str, params: &FuturesParams) -> Result<Preprocessed> {
    check_fraction("day zero fraction", params.day_zero_frac)?;
    check_winsor(params.winsor)?;
    let mut split = split_market(raw, market_id)?;
    let mut drops = Vec::new();
    split.drop_days(params.day_zero_frac, "day_zero_fraction", &mut drops);
    split.ensure_nonempty()?;
    let zero_days = |r: &[f64]| r.iter().filter(|v| **v == 0.0).count() as f64;
    split.drop_assets(zero_days, params.max_zero_days as f64, "asset_zero_days", &mut drops);
    split.ensure_nonempty()?;
    if split.dates.len() < 2 {
        return Err(Error::EmptyPanel("fewer than two days left for returns".into()));
    }
    for (id, row) in split.ids.iter().zip(split.rows.iter_mut()) {
        *row = log_returns(&fill_zeros(row).map_err(|_| Error::Unfillable(format!("{id} has no nonzero price")))?)?;
    }
    split.market = log_returns(
        &fill_zeros(&split.market).map_err(|_| Error::Unfillable(format!("market {market_id} has no nonzero price")))?,
    )?;
    split.dates.remove(0);
    Ok(Preprocessed {
        panel: split.excess_winsorized(params.winsor)?,
        drops,
    })
}
