use cbrq::backtest::{run_backtest, AssetPrediction, BacktestConfig, PredictionTable};
use cbrq::casebase::{build_cases, load_case_base, save_case_base, Case, CaseKey, QueryCase};
use cbrq::market_data::{to_month_end_prices, to_returns, DailyPriceSeries};
use cbrq::prediction::{retrieve_top_k, weighted_prediction, Neighbor, Weighting};
use cbrq::similarity::SimilarityScore;
use cbrq::{
    adjusted_corr, build_case_base, cumulative_distance, pearson, ReturnSeries, SimilarityConfig,
    Variant, YearMonth,
};
use chrono::NaiveDate;
use proptest::prelude::*;

fn start() -> YearMonth {
    YearMonth::new(2005, 2).unwrap()
}

fn returns(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.5f64..0.5, len)
}

fn variant() -> impl Strategy<Value = Variant> {
    proptest::sample::select(Variant::ALL.to_vec())
}

/// Month-end-only daily series from a price path starting in January 2005.
fn daily_from_prices(prices: &[f64]) -> DailyPriceSeries {
    let first = YearMonth::new(2005, 1).unwrap();
    let obs = prices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let m = first.offset(i as i64);
            (NaiveDate::from_ymd_opt(m.year, m.month, 28).unwrap(), p)
        })
        .collect();
    DailyPriceSeries::new("A", obs).unwrap()
}

fn case(asset: &str, anchor: YearMonth, description: Vec<f64>, solution: f64) -> Case {
    Case {
        key: CaseKey {
            asset_id: asset.into(),
            anchor,
        },
        description,
        solution,
    }
}

fn not_constant(v: &[f64]) -> bool {
    v.iter().any(|x| (x - v[0]).abs() > 1e-6)
}

proptest! {
    #[test]
    fn returns_round_trip_prices(p0 in 1.0f64..500.0, rs in returns(1..60)) {
        let s = ReturnSeries::new("A", start(), rs.clone()).unwrap();
        let prices = s.reconstruct_prices(p0);
        let back = to_returns(&to_month_end_prices(&daily_from_prices(&prices)).unwrap()).unwrap();
        prop_assert_eq!(back.start, s.start);
        for (a, b) in back.returns.iter().zip(&rs) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn returns_are_scale_invariant(prices in proptest::collection::vec(1.0f64..100.0, 2..40), c in 0.01f64..100.0) {
        let a = to_returns(&to_month_end_prices(&daily_from_prices(&prices)).unwrap()).unwrap();
        let scaled: Vec<f64> = prices.iter().map(|p| p * c).collect();
        let b = to_returns(&to_month_end_prices(&daily_from_prices(&scaled)).unwrap()).unwrap();
        for (x, y) in a.returns.iter().zip(&b.returns) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_month_ends_is_idempotent(prices in proptest::collection::vec(1.0f64..100.0, 1..40)) {
        let once = to_month_end_prices(&daily_from_prices(&prices)).unwrap();
        prop_assert_eq!(&once.prices, &prices);
        let twice = to_month_end_prices(&daily_from_prices(&once.prices)).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn similarity_is_symmetric(x in returns(12), y in returns(12), v in variant(), w in 0.0f64..=1.0) {
        let cfg = SimilarityConfig::new(v, w).unwrap();
        match (cfg.score(&x, &y), cfg.score(&y, &x)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn adjusted_correlation_ignores_positive_scale(x in returns(12), y in returns(12), c in 0.01f64..100.0) {
        prop_assume!(not_constant(&x) && not_constant(&y));
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = adjusted_corr(&x, &y).unwrap();
        let b = adjusted_corr(&scaled, &y).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn pearson_is_bounded_and_shift_invariant(x in returns(12), y in returns(12), c in -0.3f64..0.3) {
        prop_assume!(not_constant(&x) && not_constant(&y));
        let p = pearson(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&p));
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!((pearson(&shifted, &y).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn cumulative_distance_is_non_negative(x in returns(12), y in returns(12)) {
        let e = cumulative_distance(&x, &y).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(cumulative_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn clamped_prediction_stays_within_solutions(
        scores in proptest::collection::vec(-1.0f64..1.0, 1..30),
        sols in proptest::collection::vec(-0.5f64..0.5, 30),
    ) {
        let ns: Vec<Neighbor> = scores
            .iter()
            .zip(&sols)
            .enumerate()
            .map(|(i, (&s, &r))| Neighbor {
                key: CaseKey { asset_id: format!("A{i}"), anchor: start() },
                score: SimilarityScore { value: s, variant: Variant::AdjustedOnly },
                solution: r,
            })
            .collect();
        let p = weighted_prediction(&ns, Weighting::Clamp).unwrap();
        let lo = ns.iter().map(|n| n.solution).fold(f64::INFINITY, f64::min);
        let hi = ns.iter().map(|n| n.solution).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn prediction_ignores_weight_normalization(
        scores in proptest::collection::vec(0.01f64..1.0, 1..20),
        sols in proptest::collection::vec(-0.5f64..0.5, 20),
        c in 0.1f64..10.0,
    ) {
        let build = |scale: f64| -> Vec<Neighbor> {
            scores
                .iter()
                .zip(&sols)
                .enumerate()
                .map(|(i, (&s, &r))| Neighbor {
                    key: CaseKey { asset_id: format!("A{i}"), anchor: start() },
                    score: SimilarityScore { value: s * scale, variant: Variant::AdjustedOnly },
                    solution: r,
                })
                .collect()
        };
        let a = weighted_prediction(&build(1.0), Weighting::Clamp).unwrap();
        let b = weighted_prediction(&build(c), Weighting::Clamp).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn case_count_is_length_minus_window(len in 0usize..120, window in 1usize..24) {
        let s = ReturnSeries::new("A", start(), vec![0.01; len]).unwrap();
        let cases = build_cases(&s, window);
        prop_assert_eq!(cases.len(), len.saturating_sub(window));
        for c in &cases {
            prop_assert_eq!(c.description.len(), window);
        }
    }

    #[test]
    fn case_base_round_trips(rs in proptest::collection::vec(returns(13..30), 1..5)) {
        let series: Vec<ReturnSeries> = rs
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReturnSeries::new(format!("T{i}"), start(), r).unwrap())
            .collect();
        let base = build_case_base(&series, 12).unwrap();
        let mut buf = Vec::new();
        save_case_base(&base, &mut buf).unwrap();
        let back = load_case_base(buf.as_slice()).unwrap();
        prop_assert_eq!(back.cases(), base.cases());
    }

    #[test]
    fn retrieval_is_deterministic_under_permutation(
        descs in proptest::collection::vec(returns(12), 2..60),
        q in returns(12),
        k in 1usize..20,
        v in variant(),
    ) {
        let cases: Vec<Case> = descs
            .iter()
            .enumerate()
            .map(|(i, d)| case(&format!("A{:02}", i % 7), start().offset((i / 7) as i64), d.clone(), 0.0))
            .collect();
        let query = QueryCase {
            key: CaseKey { asset_id: "Q".into(), anchor: start().offset(100) },
            description: q,
            solution: None,
        };
        let cfg = SimilarityConfig::of(v);
        let forward: Vec<&Case> = cases.iter().collect();
        let backward: Vec<&Case> = cases.iter().rev().collect();
        let a = retrieve_top_k(&query, &forward, &cfg, k).unwrap();
        let b = retrieve_top_k(&query, &backward, &cfg, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn backtest_conserves_value(
        actual in proptest::collection::vec(proptest::collection::vec(-0.5f64..0.5, 6), 1..40),
        top_n in 1usize..=6,
        capital in 1.0f64..1e6,
    ) {
        let table: PredictionTable = actual
            .iter()
            .enumerate()
            .map(|(m, row)| {
                let preds = row
                    .iter()
                    .enumerate()
                    .map(|(a, &r)| AssetPrediction { asset: format!("A{a}"), predicted: -(a as f64), actual: r })
                    .collect();
                (start().offset(m as i64), preds)
            })
            .collect();
        let cfg = BacktestConfig { top_n, initial_capital: capital, ..Default::default() };
        let r = run_backtest(&table, &cfg).unwrap();
        let product: f64 = r.monthly_portfolio_returns.iter().map(|x| 1.0 + x).product();
        prop_assert!((r.accumulated_value / (capital * product) - 1.0).abs() < 1e-9);
        prop_assert_eq!(r.trade_count, top_n * actual.len());
        prop_assert_eq!(r.value_path.len(), actual.len() + 1);
        let again = run_backtest(&table, &cfg).unwrap();
        prop_assert_eq!(r, again);
    }
}
