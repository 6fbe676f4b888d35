//! Clustering-free benchmark: signed, normalized area under the
//! cross-correlation curve.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::panel::TimeSeriesPanel;
use crate::similarity::pearson;

/// `out[m - 1] = corr(x[t - m], y[t])` over the overlap `t = m..T`, for
/// `m = 1..=max_lag`.
pub fn ccf(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    if max_lag == 0 {
        return Err(Error::InvalidParameter("maximum lag must be positive".into()));
    }
    let t = x.len();
    if t <= max_lag + 2 {
        return Err(Error::InvalidInput(format!(
            "series of length {t} too short for maximum lag {max_lag}"
        )));
    }
    (1..=max_lag).map(|m| pearson(&x[..t - m], &y[m..])).collect()
}

/// Real-valued lead-lag scores from the CCF benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct CcfMatrix {
    pub scores: SquareMatrix<f64>,
    pub ids: Vec<String>,
}

fn area(x: &[f64], y: &[f64], max_lag: usize) -> Result<f64> {
    match ccf(x, y, max_lag) {
        Ok(c) => Ok(c.iter().map(|v| v.abs()).sum()),
        // a constant overlap carries no directional information
        Err(Error::UndefinedCorrelation(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Score from the two directed areas: `max(a, b) * sign(a - b) / (a + b)`.
pub fn signed_normalized_area(forward: f64, backward: f64) -> f64 {
    let denom = forward + backward;
    if denom == 0.0 || forward == backward {
        return 0.0;
    }
    forward.max(backward) * (forward - backward).signum() / denom
}

/// Entry `(i, j)` is positive when series `i` leads series `j`. Pairs whose
/// overlaps are constant contribute zero area.
pub fn ccf_lead_lag_matrix(panel: &TimeSeriesPanel, max_lag: usize) -> Result<CcfMatrix> {
    let n = panel.n_series();
    if panel.len() <= max_lag + 2 {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for maximum lag {max_lag}",
            panel.len()
        )));
    }
    let mut scores = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let forward = area(panel.row(i), panel.row(j), max_lag)?;
            let backward = area(panel.row(j), panel.row(i), max_lag)?;
            let g = signed_normalized_area(forward, backward);
            scores.set(i, j, g);
            scores.set(j, i, -g);
        }
    }
    Ok(CcfMatrix {
        scores,
        ids: panel.ids().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn self_ccf_is_autocorrelation() {
        let x = noise(200, 1);
        let c = ccf(&x, &x, 4).unwrap();
        for m in 1..=4 {
            assert_eq!(c[m - 1], pearson(&x[..200 - m], &x[m..]).unwrap());
        }
    }

    #[test]
    fn exact_shift_has_unit_peak() {
        let base = noise(103, 2);
        let x = base[3..].to_vec();
        let y = base[..100].to_vec();
        // y[t] = x[t - 3]
        let c = ccf(&x, &y, 5).unwrap();
        assert!((c[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_series_rejected() {
        assert!(ccf(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], 1).is_err());
    }

    #[test]
    fn equal_areas_give_zero() {
        assert_eq!(signed_normalized_area(0.7, 0.7), 0.0);
        assert_eq!(signed_normalized_area(0.0, 0.0), 0.0);
        assert!((signed_normalized_area(3.0, 1.0) - 0.75).abs() < 1e-15);
        assert!((signed_normalized_area(1.0, 3.0) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn shifted_pair_direction() {
        let base = noise(503, 3);
        let eps = noise(500, 4);
        let x = base[3..].to_vec();
        let y: Vec<f64> = base[..500].iter().zip(&eps).map(|(b, e)| b + 0.1 * e).collect();
        let panel = TimeSeriesPanel::from_rows(vec![x.clone(), y.clone()]).unwrap();
        let g = ccf_lead_lag_matrix(&panel, 5).unwrap();
        // direct evaluation of the two areas
        let fwd: f64 = (1..=5).map(|m| pearson(&x[..500 - m], &y[m..]).unwrap().abs()).sum();
        let bwd: f64 = (1..=5).map(|m| pearson(&y[..500 - m], &x[m..]).unwrap().abs()).sum();
        let expected = fwd.max(bwd) * (fwd - bwd).signum() / (fwd + bwd);
        assert_eq!(g.scores.get(0, 1), expected);
        assert!(g.scores.get(0, 1) >= 0.5);
        assert_eq!(g.scores.get(1, 0), -g.scores.get(0, 1));
    }
}
