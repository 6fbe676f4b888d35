use std::collections::HashMap;

use proptest::prelude::*;

use leadlag::backtest::{
    max_drawdown, performance_metrics, rescale_pnl, run_strategy, sample_std, PnLSeries, StrategyConfig,
    StrategyMethod,
};
use leadlag::cluster::{kmeans_points, ClusterAssignment, KMeansParams, Points};
use leadlag::ingest::{fill_zeros, preprocess_equity, read_wide, write_wide, EquityParams, RawTable};
use leadlag::leadlag::{
    aggregate_lag, ccf, ccf_lead_lag_matrix, lead_lag_matrix, pair_lag_multisets, rowsum_rank, voting_matrix,
    Aggregation, LagMultiset,
};
use leadlag::simulate::adjusted_rand_index;
use leadlag::{extract_subsequences, SquareMatrix, TimeSeriesPanel};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn panel_strategy(n: std::ops::RangeInclusive<usize>, t: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = TimeSeriesPanel> {
    (n, t).prop_flat_map(|(n, t)| {
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, t), n)
            .prop_map(|rows| TimeSeriesPanel::from_rows(rows).unwrap())
    })
}

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Exhaustive minimum within-cluster sum of squares over every labeling.
fn brute_force_inertia(data: &[f64], dim: usize, k: usize) -> f64 {
    let n = data.len() / dim;
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..dim {
                let m = members.iter().map(|&i| data[i * dim + d]).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|&i| (data[i * dim + d] - m).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn window_count_and_contents(panel in panel_strategy(1..=4, 1..=40), q in 1usize..40, s in 1usize..6) {
        let t = panel.len();
        match extract_subsequences(&panel, q, s) {
            Ok(u) => {
                prop_assert!(q <= t);
                let h = (t - q) / s + 1;
                prop_assert_eq!(u.per_series(), h);
                prop_assert_eq!(u.len(), panel.n_series() * h);
                for (r, o) in u.origin().iter().enumerate() {
                    prop_assert_eq!(o.start % s, 0);
                    prop_assert_eq!(u.window(r), &panel.row(o.series)[o.start..o.start + q]);
                }
            }
            Err(_) => prop_assert!(q > t),
        }
    }

    #[test]
    fn kmeans_inertia_non_increasing_and_labels_in_range(
        data in prop::collection::vec(-10.0f64..10.0, 2..80),
        k in 1usize..8,
        seed in any::<u64>(),
    ) {
        let dim = 2;
        let data = &data[..data.len() / dim * dim];
        let p = Points::new(data, dim).unwrap();
        prop_assume!(!p.is_empty() && k <= p.len());
        let fit = kmeans_points(p, k, seed, &KMeansParams::default()).unwrap();
        prop_assert!(fit.assignment.labels.iter().all(|&l| l < k));
        for w in fit.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        let last = *fit.inertia_history.last().unwrap();
        prop_assert!((fit.assignment.inertia.unwrap() - last).abs() <= 1e-9 * (1.0 + last));
    }

    #[test]
    fn kmeans_never_beats_exhaustive_optimum(
        data in prop::collection::vec(-10.0f64..10.0, 4..=9),
        k in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let p = Points::new(&data, 1).unwrap();
        prop_assume!(k <= p.len());
        let fit = kmeans_points(p, k, seed, &KMeansParams { restarts: 3, ..KMeansParams::default() }).unwrap();
        let opt = brute_force_inertia(&data, 1, k);
        let got = fit.assignment.inertia.unwrap();
        prop_assert!(got >= opt - 1e-9, "kmeans {} below optimum {}", got, opt);
        // a fixed point of Lloyd: every point sits at its nearest center
        for (i, &l) in fit.assignment.labels.iter().enumerate() {
            let own = (data[i] - fit.centers[l]).powi(2);
            for c in 0..k {
                prop_assert!(own <= (data[i] - fit.centers[c]).powi(2) + 1e-9);
            }
        }
    }

    #[test]
    fn pair_counts_match_brute_force(
        panel in panel_strategy(2..=4, 4..=12),
        q in 1usize..4,
        k in 1usize..5,
        label_seed in prop::collection::vec(0usize..100, 64),
    ) {
        prop_assume!(q <= panel.len());
        let u = extract_subsequences(&panel, q, 1).unwrap();
        let labels: Vec<usize> = (0..u.len()).map(|r| label_seed[r % label_seed.len()] % k).collect();
        let a = ClusterAssignment { labels: labels.clone(), k, inertia: None };
        let ms = pair_lag_multisets(&a, &u).unwrap();
        let mut expected: HashMap<(usize, usize), Vec<i64>> = HashMap::new();
        let origin = u.origin();
        for x in 0..u.len() {
            for y in 0..u.len() {
                let (ox, oy) = (origin[x], origin[y]);
                if labels[x] == labels[y] && ox.series < oy.series {
                    expected.entry((ox.series, oy.series)).or_default().push(oy.start as i64 - ox.start as i64);
                }
            }
        }
        let n = panel.n_series();
        for i in 0..n {
            for j in (i + 1)..n {
                let mut e = expected.remove(&(i, j)).unwrap_or_default();
                e.sort_unstable();
                prop_assert_eq!(ms.expanded(i, j), e);
            }
        }
    }

    #[test]
    fn voting_filters_and_gamma_antisymmetry(
        n in 2usize..6,
        obs in prop::collection::vec((0usize..6, 0usize..6, -5i64..=5), 0..60),
        theta in 1u64..8,
    ) {
        let obs: Vec<_> = obs.into_iter().filter(|&(i, j, _)| i < j && j < n).collect();
        let ms = LagMultiset::from_observations(n, obs).unwrap();
        for agg in [Aggregation::Mode, Aggregation::Median] {
            let lo = lead_lag_matrix(&ms, &voting_matrix(&ms, theta).unwrap(), agg).unwrap();
            let hi = lead_lag_matrix(&ms, &voting_matrix(&ms, theta + 1).unwrap(), agg).unwrap();
            let unfiltered = lead_lag_matrix(&ms, &voting_matrix(&ms, 1).unwrap(), agg).unwrap();
            prop_assert!(lo.gamma.is_antisymmetric());
            for i in 0..n {
                for j in 0..n {
                    if hi.gamma.get(i, j) != 0 {
                        prop_assert_eq!(lo.gamma.get(i, j), hi.gamma.get(i, j));
                    }
                    if i < j {
                        let direct = aggregate_lag(&ms.expanded(i, j), agg).unwrap_or(0);
                        prop_assert_eq!(unfiltered.gamma.get(i, j), direct);
                        let kept = ms.size(i, j) >= theta;
                        prop_assert_eq!(lo.gamma.get(i, j), if kept { direct } else { 0 });
                    }
                }
            }
        }
    }

    #[test]
    fn ccf_matches_direct_evaluation(
        x in prop::collection::vec(-3.0f64..3.0, 12..30),
        noise in prop::collection::vec(-3.0f64..3.0, 30),
        max_lag in 1usize..5,
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| 0.5 * a + b).collect();
        let c = ccf(&x, &y, max_lag).unwrap();
        let t = x.len();
        for m in 1..=max_lag {
            let direct = naive_pearson(&x[..t - m], &y[m..]);
            prop_assert!((c[m - 1] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn ccf_matrix_antisymmetric_and_rank_consistent(panel in panel_strategy(2..=5, 10..=25), max_lag in 1usize..4) {
        let m = ccf_lead_lag_matrix(&panel, max_lag).unwrap();
        let n = panel.n_series();
        for i in 0..n {
            prop_assert_eq!(m.scores.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(m.scores.get(i, j), -m.scores.get(j, i));
                prop_assert!(m.scores.get(i, j).abs() <= 1.0);
            }
        }
        let ranked = rowsum_rank(&m.scores, &m.ids).unwrap();
        prop_assert_eq!(ranked.len(), n);
        for w in ranked.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        for e in &ranked {
            let higher = ranked.iter().filter(|o| o.score > e.score).count();
            prop_assert_eq!(e.rank, higher + 1);
        }
    }

    #[test]
    fn rank_of_integer_matrix(entries in prop::collection::vec(-6i64..=6, 21)) {
        let n = 7;
        let mut g = SquareMatrix::<f64>::zeros(n);
        let mut it = entries.into_iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = it.next().unwrap() as f64;
                g.set(i, j, v);
                g.set(j, i, -v);
            }
        }
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let ranked = rowsum_rank(&g, &ids).unwrap();
        let mut seen: Vec<usize> = ranked.iter().map(|e| e.index).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(ranked.iter().map(|e| e.score).sum::<f64>(), 0.0);
        for e in &ranked {
            prop_assert_eq!(e.score, g.row(e.index).iter().sum::<f64>());
        }
    }

    #[test]
    fn rescaled_pnl_hits_target_vol(raw in prop::collection::vec(-0.05f64..0.05, 5..300), target in 0.01f64..1.0) {
        prop_assume!(sample_std(&raw) > 1e-8);
        let r = rescale_pnl(&raw, target).unwrap();
        prop_assert!((sample_std(&r) * 252f64.sqrt() - target).abs() < 1e-9);
        let dates = (0..raw.len()).map(|d| d.to_string()).collect();
        let s = PnLSeries::new(dates, raw.clone(), 0.15).unwrap();
        let cum = s.cumulative();
        let total: f64 = s.rescaled.iter().sum();
        prop_assert!((cum.last().unwrap() - total).abs() < 1e-12 * (1.0 + total.abs()));
    }

    #[test]
    fn report_is_scale_invariant_and_sign_flips(raw in prop::collection::vec(-1.0f64..1.0, 6..200), c in 0.01f64..100.0) {
        prop_assume!(sample_std(&raw) > 1e-6);
        let Ok(base) = performance_metrics(&raw) else { return Ok(()); };
        let scaled: Vec<f64> = raw.iter().map(|v| v * c).collect();
        let s = performance_metrics(&scaled).unwrap();
        prop_assert!((base.sharpe - s.sharpe).abs() < 1e-9 * (1.0 + base.sharpe.abs()));
        prop_assert!((base.sharpe_stat - s.sharpe_stat).abs() < 1e-8 * (1.0 + base.sharpe_stat.abs()));
        prop_assert_eq!(base.hit_rate, s.hit_rate);
        let neg: Vec<f64> = raw.iter().map(|v| -v).collect();
        if let Ok(f) = performance_metrics(&neg) {
            prop_assert!((base.sharpe + f.sharpe).abs() < 1e-9 * (1.0 + base.sharpe.abs()));
            prop_assert!((base.p_value - f.p_value).abs() < 1e-9 || base.sharpe == 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&base.p_value));
        prop_assert!((0.0..=1.0).contains(&base.hit_rate));
    }

    #[test]
    fn drawdown_bounds(raw in prop::collection::vec(-1.0f64..1.0, 0..200)) {
        let mdd = max_drawdown(&raw);
        prop_assert!(mdd <= 0.0);
        prop_assert!(mdd >= -raw.iter().map(|v| v.abs()).sum::<f64>() - 1e-12);
        if raw.iter().all(|v| *v >= 0.0) {
            prop_assert_eq!(mdd, 0.0);
        }
    }

    #[test]
    fn ari_symmetric_and_bounded(a in prop::collection::vec(0u8..4, 1..60), b_seed in prop::collection::vec(0u8..4, 60)) {
        let b = &b_seed[..a.len()];
        let ab = adjusted_rand_index(&a, b).unwrap();
        let ba = adjusted_rand_index(b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12 && ab >= -1.0);
        let relabeled: Vec<u8> = a.iter().map(|v| 3 - v).collect();
        prop_assert!((adjusted_rand_index(&a, &relabeled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strategy_ignores_global_sign_flip(panel in panel_strategy(4..=5, 26..=30), p in 1usize..3, delta in 1usize..3) {
        let cfg = StrategyConfig {
            method: StrategyMethod::Ccf,
            lookback: p,
            horizon: delta,
            leader_fraction: 0.5,
            ..StrategyConfig::default()
        };
        let flipped = panel.map_rows(|r| r.iter().map(|v| -v).collect()).unwrap();
        match (run_strategy(&panel, &cfg), run_strategy(&flipped, &cfg)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.laggers.raw, &b.laggers.raw);
                prop_assert_eq!(&a.leaders.raw, &b.leaders.raw);
                prop_assert_eq!(a.laggers.len(), panel.len() - 21 - delta + 1);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "flip changed success: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn wide_csv_round_trip(panel in panel_strategy(1..=4, 1..=20)) {
        let mut buf = Vec::new();
        write_wide(&panel, &mut buf).unwrap();
        let back = read_wide(buf.as_slice()).unwrap().to_panel().unwrap();
        prop_assert_eq!(back.ids(), panel.ids());
        for i in 0..panel.n_series() {
            prop_assert_eq!(back.row(i), panel.row(i));
        }
    }

    #[test]
    fn equity_preprocessing_deterministic_and_clipped(
        rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0f64), -0.5f64..0.5], 12), 3..6),
        winsor in 0.01f64..0.3,
    ) {
        let n = rows.len();
        let mut ids: Vec<String> = (0..n - 1).map(|i| format!("a{i}")).collect();
        ids.push("mkt".into());
        let dates = (0..12).map(|d| format!("d{d:02}")).collect();
        let raw = RawTable::new(ids, dates, rows).unwrap();
        let params = EquityParams { winsor, ..EquityParams::default() };
        let a = preprocess_equity(&raw, "mkt", &params);
        let b = preprocess_equity(&raw, "mkt", &params);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(&a, &b);
            prop_assert!(a.panel.rows().flatten().all(|v| v.abs() <= winsor));
            prop_assert!(a.panel.index_of("mkt").is_none());
            prop_assert_eq!(a.panel.n_series() + a.drops.iter().filter(|d| d.rule == "asset_zero_fraction").count(), n - 1);
        }
    }

    #[test]
    fn zero_fill_is_idempotent(x in prop::collection::vec(prop_oneof![Just(0.0f64), 0.5f64..100.0], 1..50)) {
        match fill_zeros(&x) {
            Ok(f) => {
                prop_assert!(f.iter().all(|v| *v != 0.0));
                prop_assert_eq!(fill_zeros(&f).unwrap(), f.clone());
                for (a, b) in x.iter().zip(&f) {
                    if *a != 0.0 {
                        prop_assert_eq!(a, b);
                    }
                }
            }
            Err(_) => prop_assert!(x.iter().all(|v| *v == 0.0)),
        }
    }
}
