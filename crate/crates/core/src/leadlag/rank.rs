use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// One row of a RowSum ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    /// Competition rank: one plus the number of strictly higher scores.
    pub rank: usize,
    pub id: String,
    /// Position of the series in the input panel.
    pub index: usize,
    pub score: f64,
}

/// Orders series from most leading to most lagging by row sums of an
/// antisymmetric lead-lag matrix. Ties keep input order and share a rank.
pub fn rowsum_rank(matrix: &SquareMatrix<f64>, ids: &[String]) -> Result<Vec<RankEntry>> {
    let n = matrix.n();
    if ids.len() != n {
        return Err(Error::Dimension(format!("{} ids for a {n}x{n} matrix", ids.len())));
    }
    let scale = matrix.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !matrix.is_antisymmetric(1e-12 * scale) {
        return Err(Error::InvalidMatrix("lead-lag matrix is not antisymmetric".into()));
    }
    let scores: Vec<f64> = (0..n).map(|i| matrix.row(i).iter().sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::with_capacity(n);
    for (pos, &i) in order.iter().enumerate() {
        let rank = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            out.last().map_or(1, |e: &RankEntry| e.rank)
        } else {
            pos + 1
        };
        out.push(RankEntry {
            rank,
            id: ids[i].clone(),
            index: i,
            score: scores[i],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn leader_first() {
        let m = SquareMatrix::from_rows(&[vec![0.0, 3.0], vec![-3.0, 0.0]]).unwrap();
        let r = rowsum_rank(&m, &ids(2)).unwrap();
        assert_eq!(r[0].id, "s0");
        assert_eq!((r[0].rank, r[1].rank), (1, 2));
    }

    #[test]
    fn zero_matrix_all_tied() {
        let r = rowsum_rank(&SquareMatrix::zeros(4), &ids(4)).unwrap();
        assert!(r.iter().all(|e| e.rank == 1));
        assert_eq!(r.iter().map(|e| e.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn competition_ranks_with_ties() {
        // one clear leader, five series tied behind it, then the rest
        let n = 8;
        let mut m = SquareMatrix::zeros(n);
        let mut put = |i: usize, j: usize, v: f64| {
            m.set(i, j, v);
            m.set(j, i, -v);
        };
        put(0, 6, 5.0);
        for i in 1..=5 {
            put(i, 6, 1.0);
            put(i, 7, 1.0);
        }
        put(0, 7, 1.0);
        let r = rowsum_rank(&m, &ids(n)).unwrap();
        let ranks: Vec<usize> = r.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, vec![1, 2, 2, 2, 2, 2, 7, 8]);
    }

    #[test]
    fn rejects_non_antisymmetric() {
        let m = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(rowsum_rank(&m, &ids(2)), Err(Error::InvalidMatrix(_))));
    }
}
