//! Plain-text output: CSV for matrices, series and tables, JSON for reports.

use std::fmt::Display;
use std::io::Write;

use serde::Serialize;

use crate::backtest::{GridRecord, PnLSeries};
use crate::cluster::ClusterAssignment;
use crate::error::Result;
use crate::experiment::SweepRecord;
use crate::leadlag::{LagMultiset, RankEntry};
use crate::matrix::SquareMatrix;
use crate::panel::SubsequenceUniverse;

/// Square matrix with the ids as both header and first column.
pub fn write_square<T: Copy + Default + Display>(m: &SquareMatrix<T>, ids: &[String], w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per distinct lag of each pair: `i, j, lag, count`.
pub fn write_lags(ms: &LagMultiset, ids: &[String], w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["i", "j", "lag", "count"])?;
    for (i, j, lag, count) in ms.iter() {
        w.write_record([ids[i].clone(), ids[j].clone(), lag.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Cluster label of every window; window starts are written 1-based.
pub fn write_assignment(
    universe: &SubsequenceUniverse,
    assignment: &ClusterAssignment,
    ids: &[String],
    w: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["window", "series", "start_index", "cluster"])?;
    for (r, (o, c)) in universe.origin().iter().zip(&assignment.labels).enumerate() {
        w.write_record([r.to_string(), ids[o.series].clone(), (o.start + 1).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-form `row, col, value` triples of a similarity heatmap.
pub fn write_heatmap(m: &SquareMatrix<f64>, w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["row", "col", "value"])?;
    for i in 0..m.n() {
        for (j, v) in m.row(i).iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_pnl(pnl: &PnLSeries, w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["date", "raw", "rescaled", "cumulative"])?;
    for (((d, raw), res), cum) in pnl.dates.iter().zip(&pnl.raw).zip(&pnl.rescaled).zip(pnl.cumulative()) {
        w.write_record([d.clone(), raw.to_string(), res.to_string(), cum.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows<R: Serialize>(rows: impl IntoIterator<Item = R>, w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(records: &[SweepRecord], w: impl Write) -> Result<()> {
    write_rows(records, w)
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    id: &'a str,
    score: f64,
}

pub fn write_ranking(entries: &[RankEntry], w: impl Write) -> Result<()> {
    write_rows(
        entries.iter().map(|e| RankRow {
            rank: e.rank,
            id: &e.id,
            score: e.score,
        }),
        w,
    )
}

/// Grid results with one column per metric; undefined ratios are empty.
pub fn write_grid(records: &[GridRecord], w: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "method",
        "lookback",
        "horizon",
        "leader_fraction",
        "basket",
        "e_returns",
        "volatility",
        "downside_deviation",
        "max_drawdown",
        "sortino",
        "calmar",
        "hit_rate",
        "avg_profit_over_avg_loss",
        "pnl_per_trade",
        "sharpe",
        "sharpe_stat",
        "p_value",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for g in records {
        let r = &g.report;
        w.write_record([
            g.method.to_string(),
            g.lookback.to_string(),
            g.horizon.to_string(),
            g.leader_fraction.to_string(),
            g.basket.to_string(),
            r.e_returns.to_string(),
            r.volatility.to_string(),
            r.downside_deviation.to_string(),
            r.max_drawdown.to_string(),
            opt(r.sortino),
            opt(r.calmar),
            r.hit_rate.to_string(),
            opt(r.avg_profit_over_avg_loss),
            r.pnl_per_trade.to_string(),
            r.sharpe.to_string(),
            r.sharpe_stat.to_string(),
            r.p_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn square_layout() {
        let m = SquareMatrix::from_rows(&[vec![0i64, 3], vec![-3, 0]]).unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        assert_eq!(text(|b| write_square(&m, &ids, b)), "id,a,b\na,0,3\nb,-3,0\n");
    }

    #[test]
    fn lags_layout() {
        let ms = LagMultiset::from_observations(2, [(0, 1, 3), (0, 1, 3), (0, 1, -7)]).unwrap();
        let ids = vec!["x".to_string(), "y".to_string()];
        assert_eq!(text(|b| write_lags(&ms, &ids, b)), "i,j,lag,count\nx,y,-7,1\nx,y,3,2\n");
    }

    #[test]
    fn pnl_layout() {
        let p = PnLSeries {
            dates: vec!["d1".into(), "d2".into()],
            raw: vec![1.0, -0.5],
            rescaled: vec![2.0, -1.0],
            target_vol: 0.15,
        };
        assert_eq!(text(|b| write_pnl(&p, b)), "date,raw,rescaled,cumulative\nd1,1,2,2\nd2,-0.5,-1,1\n");
    }

    #[test]
    fn ranking_layout() {
        let e = vec![RankEntry {
            rank: 1,
            id: "a".into(),
            index: 0,
            score: 2.5,
        }];
        assert_eq!(text(|b| write_ranking(&e, b)), "rank,id,score\n1,a,2.5\n");
    }
}
