//! Monthly top-N trading simulation driven by k-NN return predictions.
//!
//! Each month the `top_n` assets with the highest predicted return are bought
//! in equal proportion of current capital and sold at month end; the
//! portfolio return is the mean of their realised returns and capital
//! compounds. The bootstrap repeats the whole pipeline with a seeded random
//! subset of assets removed.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::casebase::{build_case_base, CaseBase, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::month::YearMonth;
use crate::prediction::{evaluation_queries, predict_return_with, PredictionOptions};
use crate::similarity::{SimilarityConfig, Variant};

/// What to do in a month with fewer than `top_n` predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shortfall {
    #[default]
    Fail,
    InvestAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub initial_capital: f64,
    pub top_n: usize,
    pub k: usize,
    pub horizon: usize,
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
    pub shortfall: Shortfall,
    /// Charged once per month on the whole portfolio, in basis points.
    pub cost_bps: f64,
    pub require_full_warmup: bool,
    pub options: PredictionOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_capital: 1000.0,
            top_n: 5,
            k: 10,
            horizon: DEFAULT_HORIZON,
            start: None,
            end: None,
            shortfall: Shortfall::Fail,
            cost_bps: 0.0,
            require_full_warmup: true,
            options: PredictionOptions::default(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be at least 1".into()));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(Error::Config("initial_capital must be positive".into()));
        }
        if self.k == 0 || self.horizon == 0 {
            return Err(Error::Config("k and horizon must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetPrediction {
    pub asset: String,
    pub predicted: f64,
    pub actual: f64,
}

pub type PredictionTable = BTreeMap<YearMonth, Vec<AssetPrediction>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub month: YearMonth,
    pub asset: String,
    pub predicted: f64,
    pub actual: f64,
    /// Fraction of capital allocated.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub months: Vec<YearMonth>,
    pub monthly_portfolio_returns: Vec<f64>,
    /// `initial_capital` followed by the value at each month end.
    pub value_path: Vec<f64>,
    pub accumulated_value: f64,
    pub annualised_return: f64,
    /// Undefined for fewer than two months.
    pub annualised_volatility: Option<f64>,
    pub trade_count: usize,
    pub ledger: Vec<LedgerEntry>,
}

/// Top `n` by predicted return, ties broken by ticker.
pub fn select_top_n(predictions: &[AssetPrediction], n: usize) -> Vec<&AssetPrediction> {
    let mut ranked: Vec<&AssetPrediction> = predictions.iter().collect();
    ranked.sort_by(|a, b| {
        b.predicted
            .total_cmp(&a.predicted)
            .then_with(|| a.asset.cmp(&b.asset))
    });
    ranked.truncate(n);
    ranked
}

pub fn run_backtest(predictions_by_month: &PredictionTable, config: &BacktestConfig) -> Result<BacktestResult> {
    config.validate()?;
    let in_span = |m: &YearMonth| {
        config.start.is_none_or(|s| *m >= s) && config.end.is_none_or(|e| *m <= e)
    };
    let cost = config.cost_bps / 10_000.0;

    let mut months = Vec::new();
    let mut returns = Vec::new();
    let mut value_path = vec![config.initial_capital];
    let mut ledger = Vec::new();
    let mut value = config.initial_capital;

    for (&month, preds) in predictions_by_month.iter().filter(|(m, _)| in_span(m)) {
        if preds.len() < config.top_n && config.shortfall == Shortfall::Fail {
            return Err(Error::Domain(format!(
                "{month}: {} predictions for top_n = {}",
                preds.len(),
                config.top_n
            )));
        }
        let chosen = select_top_n(preds, config.top_n);
        if chosen.is_empty() {
            return Err(Error::Domain(format!("{month}: no predictions")));
        }
        let weight = 1.0 / chosen.len() as f64;
        let r = chosen.iter().map(|p| p.actual).sum::<f64>() / chosen.len() as f64 - cost;
        ledger.extend(chosen.iter().map(|p| LedgerEntry {
            month,
            asset: p.asset.clone(),
            predicted: p.predicted,
            actual: p.actual,
            weight,
        }));
        value *= 1.0 + r;
        months.push(month);
        returns.push(r);
        value_path.push(value);
    }
    if months.is_empty() {
        return Err(Error::Domain("no trading months in range".into()));
    }
    let annualised_return = annualised_return(&value_path, months.len())?;
    let annualised_volatility = annualised_volatility(&returns).ok();
    Ok(BacktestResult {
        trade_count: ledger.len(),
        accumulated_value: value,
        months,
        monthly_portfolio_returns: returns,
        value_path,
        annualised_return,
        annualised_volatility,
        ledger,
    })
}

/// Geometric annualisation `(V_end / V_start)^(12 / months) - 1`.
pub fn annualised_return(value_path: &[f64], months: usize) -> Result<f64> {
    if months == 0 {
        return Err(Error::Domain("annualised return needs at least one month".into()));
    }
    let (Some(&start), Some(&end)) = (value_path.first(), value_path.last()) else {
        return Err(Error::Domain("empty value path".into()));
    };
    if !(start > 0.0 && end > 0.0) {
        return Err(Error::Domain(format!("non-positive value in path ({start}, {end})")));
    }
    Ok((end / start).powf(12.0 / months as f64) - 1.0)
}

/// Sample standard deviation of monthly returns scaled by `sqrt(12)`.
pub fn annualised_volatility(monthly_returns: &[f64]) -> Result<f64> {
    let n = monthly_returns.len();
    if n < 2 {
        return Err(Error::Domain("volatility needs at least two observations".into()));
    }
    let mean = monthly_returns.iter().sum::<f64>() / n as f64;
    let var = monthly_returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt() * 12f64.sqrt())
}

/// Predicts every warm query of `full` and groups predictions by month.
/// Queries whose retrieval fails are left out of their month.
pub fn predict_by_month(
    full: &CaseBase,
    similarity: &SimilarityConfig,
    config: &BacktestConfig,
) -> Result<PredictionTable> {
    let queries = evaluation_queries(full, config.horizon, config.require_full_warmup);
    let predicted: Vec<Result<f64>> = queries
        .par_iter()
        .map(|q| {
            let view = full.rolling_window(q.anchor(), config.horizon)?;
            predict_return_with(q, &view.cases, similarity, config.k, &config.options)
                .map(|p| p.predicted_return)
        })
        .collect();
    let mut table = PredictionTable::new();
    for (q, p) in queries.iter().zip(predicted) {
        match p {
            Ok(predicted) => table.entry(q.anchor()).or_default().push(AssetPrediction {
                asset: q.key.asset_id.clone(),
                predicted,
                actual: q.solution.expect("evaluation queries carry solutions"),
            }),
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => debug!(query = %q.key, error = %e, "no prediction"),
        }
    }
    Ok(table)
}

/// Seed for bootstrap run `run`: the first word of the ChaCha8 stream
/// `run` keyed by `master_seed`.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run as u64);
    rng.next_u64()
}

/// Tickers removed in one run: `floor(drop_fraction * A)` drawn uniformly
/// from the sorted ticker list. Returned in sorted order.
pub fn dropped_assets(tickers: &[&str], drop_fraction: f64, seed: u64) -> Vec<String> {
    let n_drop = (drop_fraction * tickers.len() as f64).floor() as usize;
    if n_drop == 0 {
        return Vec::new();
    }
    let mut sorted = tickers.to_vec();
    sorted.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, sorted.len(), n_drop).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| sorted[i].to_owned()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub run: Option<usize>,
    pub accumulated_value: f64,
    pub annualised_return: f64,
    pub annualised_volatility: Option<f64>,
    pub trade_count: usize,
    pub months: usize,
}

impl RunStats {
    fn of(run: Option<usize>, r: &BacktestResult) -> Self {
        Self {
            run,
            accumulated_value: r.accumulated_value,
            annualised_return: r.annualised_return,
            annualised_volatility: r.annualised_volatility,
            trade_count: r.trade_count,
            months: r.months.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub weight: f64,
    /// Single run on the complete dataset.
    pub full_dataset: RunStats,
    pub runs: Vec<RunStats>,
    pub mean_accumulated_value: f64,
    pub mean_annualised_return: f64,
    pub std_annualised_return: f64,
    pub mean_annualised_volatility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub master_seed: u64,
    pub runs: usize,
    pub drop_fraction: f64,
    pub asset_count: usize,
    pub run_seeds: Vec<u64>,
    pub dropped_assets: Vec<Vec<String>>,
    pub variants: Vec<VariantSummary>,
}

impl BootstrapSummary {
    /// `variant,run,accumulated_value,annualised_return,annualised_volatility`
    pub fn write_runs_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "variant",
            "run",
            "accumulated_value",
            "annualised_return",
            "annualised_volatility",
        ])?;
        for v in &self.variants {
            for r in &v.runs {
                csv.write_record([
                    v.variant.to_string(),
                    r.run.map(|i| i.to_string()).unwrap_or_default(),
                    r.accumulated_value.to_string(),
                    r.annualised_return.to_string(),
                    r.annualised_volatility.map(|x| x.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    /// One row per variant: the full-dataset run next to the bootstrap means.
    pub fn write_table_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "variant",
            "full_accumulated_value",
            "full_annualised_return",
            "full_annualised_volatility",
            "mean_accumulated_value",
            "mean_annualised_return",
            "std_annualised_return",
            "mean_annualised_volatility",
            "runs",
        ])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for v in &self.variants {
            csv.write_record([
                v.variant.to_string(),
                v.full_dataset.accumulated_value.to_string(),
                v.full_dataset.annualised_return.to_string(),
                opt(v.full_dataset.annualised_volatility),
                v.mean_accumulated_value.to_string(),
                v.mean_annualised_return.to_string(),
                v.std_annualised_return.to_string(),
                opt(v.mean_annualised_volatility),
                v.runs.len().to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Summary plus the per-run results (`runs[variant][run]`) for ledgers.
#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    pub summary: BootstrapSummary,
    pub full_dataset: Vec<BacktestResult>,
    pub runs: Vec<Vec<BacktestResult>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub runs: usize,
    pub drop_fraction: f64,
    pub master_seed: u64,
    pub window: usize,
}

fn backtest_dataset(
    dataset: &[&ReturnSeries],
    window: usize,
    similarities: &[SimilarityConfig],
    config: &BacktestConfig,
) -> Result<Vec<BacktestResult>> {
    let owned: Vec<ReturnSeries> = dataset.iter().map(|s| (*s).clone()).collect();
    let base = build_case_base(&owned, window)?;
    similarities
        .iter()
        .map(|sim| run_backtest(&predict_by_month(&base, sim, config)?, config))
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the full pipeline once on all assets and `spec.runs` times with a
/// seeded fraction of assets removed. Runs execute on the current rayon pool
/// and are aggregated in run order.
pub fn bootstrap_backtest(
    dataset: &[ReturnSeries],
    similarities: &[SimilarityConfig],
    config: &BacktestConfig,
    spec: &BootstrapSpec,
) -> Result<BootstrapOutcome> {
    config.validate()?;
    if spec.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&spec.drop_fraction) {
        return Err(Error::Config("drop_fraction must lie in [0, 1)".into()));
    }
    if similarities.is_empty() {
        return Err(Error::Config("no similarity variants selected".into()));
    }
    let mut tickers: Vec<&str> = dataset.iter().map(|s| s.asset_id.as_str()).collect();
    tickers.sort_unstable();
    if tickers.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate tickers in dataset".into()));
    }
    let n_drop = (spec.drop_fraction * tickers.len() as f64).floor() as usize;
    let survivors = tickers.len() - n_drop;
    if survivors < config.top_n {
        return Err(Error::Config(format!(
            "{survivors} surviving assets cannot fill top_n = {}",
            config.top_n
        )));
    }

    let all: Vec<&ReturnSeries> = dataset.iter().collect();
    let full_dataset = backtest_dataset(&all, spec.window, similarities, config)?;

    let run_seeds: Vec<u64> = (0..spec.runs).map(|r| run_seed(spec.master_seed, r)).collect();
    let dropped: Vec<Vec<String>> = run_seeds
        .iter()
        .map(|&s| dropped_assets(&tickers, spec.drop_fraction, s))
        .collect();

    let per_run: Vec<Result<Vec<BacktestResult>>> = dropped
        .par_iter()
        .map(|drop| {
            let kept: Vec<&ReturnSeries> = dataset
                .iter()
                .filter(|s| drop.binary_search(&s.asset_id).is_err())
                .collect();
            backtest_dataset(&kept, spec.window, similarities, config)
        })
        .collect();
    let per_run: Vec<Vec<BacktestResult>> = per_run.into_iter().collect::<Result<_>>()?;

    // transpose to [variant][run]
    let mut runs: Vec<Vec<BacktestResult>> = vec![Vec::with_capacity(spec.runs); similarities.len()];
    for run in per_run {
        for (slot, result) in runs.iter_mut().zip(run) {
            slot.push(result);
        }
    }

    let variants = similarities
        .iter()
        .zip(&runs)
        .zip(&full_dataset)
        .map(|((sim, results), full)| {
            let ann: Vec<f64> = results.iter().map(|r| r.annualised_return).collect();
            let (mean_ret, std_ret) = mean_std(&ann);
            let acc: Vec<f64> = results.iter().map(|r| r.accumulated_value).collect();
            let vols: Option<Vec<f64>> = results.iter().map(|r| r.annualised_volatility).collect();
            VariantSummary {
                variant: sim.variant,
                weight: sim.weight,
                full_dataset: RunStats::of(None, full),
                runs: results
                    .iter()
                    .enumerate()
                    .map(|(i, r)| RunStats::of(Some(i), r))
                    .collect(),
                mean_accumulated_value: mean_std(&acc).0,
                mean_annualised_return: mean_ret,
                std_annualised_return: std_ret,
                mean_annualised_volatility: vols.map(|v| mean_std(&v).0),
            }
        })
        .collect();

    Ok(BootstrapOutcome {
        summary: BootstrapSummary {
            master_seed: spec.master_seed,
            runs: spec.runs,
            drop_fraction: spec.drop_fraction,
            asset_count: tickers.len(),
            run_seeds,
            dropped_assets: dropped,
            variants,
        },
        full_dataset,
        runs,
    })
}

/// `month,asset,predicted,actual,weight`
pub fn write_ledger_csv<W: Write>(ledger: &[LedgerEntry], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["month", "asset", "predicted", "actual", "weight"])?;
    for e in ledger {
        csv.write_record([
            e.month.to_string(),
            e.asset.clone(),
            e.predicted.to_string(),
            e.actual.to_string(),
            e.weight.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    fn p(asset: &str, predicted: f64, actual: f64) -> AssetPrediction {
        AssetPrediction {
            asset: asset.into(),
            predicted,
            actual,
        }
    }

    #[test]
    fn zero_returns_preserve_capital() {
        let table: PredictionTable = (0..6)
            .map(|m| (ym(2010, 1).offset(m), vec![p("A", 0.1, 0.0), p("B", 0.2, 0.0)]))
            .collect();
        let cfg = BacktestConfig {
            top_n: 2,
            ..Default::default()
        };
        let r = run_backtest(&table, &cfg).unwrap();
        assert_eq!(r.accumulated_value, 1000.0);
        assert_eq!(r.annualised_return, 0.0);
        assert_eq!(r.annualised_volatility, Some(0.0));
        assert_eq!(r.trade_count, 12);
    }

    #[test]
    fn one_month_two_positions() {
        let table: PredictionTable =
            [(ym(2010, 1), vec![p("A", 0.3, 0.10), p("B", 0.2, -0.02), p("C", 0.1, 0.5)])].into();
        let cfg = BacktestConfig {
            top_n: 2,
            ..Default::default()
        };
        let r = run_backtest(&table, &cfg).unwrap();
        assert!((r.monthly_portfolio_returns[0] - 0.04).abs() < 1e-12);
        assert!((r.accumulated_value - 1040.0).abs() < 1e-9);
        assert_eq!(r.value_path.len(), 2);
        assert_eq!(r.ledger.len(), 2);
        assert!(r.ledger.iter().all(|e| e.weight == 0.5));
        assert_eq!(r.annualised_volatility, None);
    }

    #[test]
    fn selection_ties_break_by_ticker() {
        let preds = [p("C", 0.1, 0.0), p("A", 0.1, 0.0), p("B", 0.2, 0.0)];
        let chosen: Vec<&str> = select_top_n(&preds, 2).iter().map(|p| p.asset.as_str()).collect();
        assert_eq!(chosen, ["B", "A"]);
    }

    #[test]
    fn shortfall_policy() {
        let table: PredictionTable = [(ym(2010, 1), vec![p("A", 0.3, 0.10)])].into();
        let cfg = BacktestConfig {
            top_n: 2,
            ..Default::default()
        };
        assert!(run_backtest(&table, &cfg).is_err());
        let cfg = BacktestConfig {
            top_n: 2,
            shortfall: Shortfall::InvestAll,
            ..Default::default()
        };
        let r = run_backtest(&table, &cfg).unwrap();
        assert_eq!(r.trade_count, 1);
        assert!((r.accumulated_value - 1100.0).abs() < 1e-9);
    }

    #[test]
    fn cost_hook_reduces_return() {
        let table: PredictionTable = [(ym(2010, 1), vec![p("A", 0.3, 0.10)])].into();
        let cfg = BacktestConfig {
            top_n: 1,
            cost_bps: 50.0,
            ..Default::default()
        };
        let r = run_backtest(&table, &cfg).unwrap();
        assert!((r.monthly_portfolio_returns[0] - 0.095).abs() < 1e-12);
    }

    #[test]
    fn annualised_return_examples() {
        assert_eq!(annualised_return(&[1000.0, 1000.0], 5).unwrap(), 0.0);
        let path: Vec<f64> = (0..=12).map(|i| 1000.0 * 1.01f64.powi(i)).collect();
        let v = annualised_return(&path, 12).unwrap();
        assert!((v - 0.126825).abs() < 1e-6);
        assert!(annualised_return(&[0.0, 1.0], 12).is_err());
        assert!(annualised_return(&[1.0, 1.0], 0).is_err());
    }

    #[test]
    fn headline_figure_is_consistent_with_geometric_annualisation() {
        // $1000 -> $8,305.23 over 172 months
        let v = annualised_return(&[1000.0, 8305.23], 172).unwrap();
        assert!((v - 0.159).abs() < 0.002, "{v}");
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(annualised_volatility(&[0.02, 0.02, 0.02]).unwrap(), 0.0);
        let v = annualised_volatility(&[0.01, -0.01]).unwrap();
        assert!((v - 0.048990).abs() < 1e-6);
        assert!((v - 0.02f64.sqrt() * 0.1 * 12f64.sqrt()).abs() < 1e-12);
        let scaled = annualised_volatility(&[0.03, -0.03]).unwrap();
        assert!((scaled - 3.0 * v).abs() < 1e-12);
        assert!(annualised_volatility(&[0.01]).is_err());
    }

    #[test]
    fn run_seeds_are_stable_and_distinct() {
        assert_eq!(run_seed(7, 3), run_seed(7, 3));
        assert_ne!(run_seed(7, 3), run_seed(7, 4));
        assert_ne!(run_seed(7, 3), run_seed(8, 3));
    }

    #[test]
    fn dropout_count() {
        let names: Vec<String> = (0..160).map(|i| format!("T{i:03}")).collect();
        let tickers: Vec<&str> = names.iter().map(String::as_str).collect();
        let d = dropped_assets(&tickers, 0.2, 11);
        assert_eq!(d.len(), 32);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert!(dropped_assets(&tickers, 0.0, 11).is_empty());
    }
}
