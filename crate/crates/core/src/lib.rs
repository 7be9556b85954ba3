//! Case-based prediction of next-month stock returns.
//!
//! Monthly return histories are cut into cases (a trailing window of returns
//! plus the following month's return). A query is answered by retrieving the
//! most similar cases from the preceding months across all assets and taking
//! the similarity-weighted mean of their outcomes. The default similarity
//! blends a zero-referenced correlation with closeness of cumulative return.
//!
//! ```no_run
//! use cbrq::{build_case_base, evaluation_queries, predict_return, ReturnSeries, SimilarityConfig};
//! # fn main() -> cbrq::Result<()> {
//! # let series: Vec<ReturnSeries> = vec![];
//! let base = build_case_base(&series, 12)?;
//! let query = &evaluation_queries(&base, 6, true)[0];
//! let pool = base.rolling_window(query.anchor(), 6)?;
//! let p = predict_return(query, &pool.cases, &SimilarityConfig::default(), 10)?;
//! println!("{} -> {:+.4}", p.query, p.predicted_return);
//! # Ok(())
//! # }
//! ```

pub mod backtest;
pub mod casebase;
pub mod cli;
pub mod config;
pub mod error;
pub mod market_data;
pub mod month;
pub mod prediction;
pub mod similarity;
pub mod synthetic;

pub use backtest::{
    annualised_return, annualised_volatility, bootstrap_backtest, run_backtest, BacktestConfig,
    BacktestResult, BootstrapSpec, BootstrapSummary,
};
pub use casebase::{
    build_case_base, build_cases, load_case_base, rolling_case_base, save_case_base, Case,
    CaseBase, CaseKey, QueryCase,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use market_data::{
    parse_daily_prices, to_month_end_prices, to_returns, DailyPriceSeries, MonthlyPriceSeries,
    ReturnSeries,
};
pub use month::YearMonth;
pub use prediction::{
    evaluate_errors, evaluation_queries, predict_return, retrieve_top_k, similarity_histogram,
    weight_sweep, ErrorReport, Prediction, WeightSweepReport,
};
pub use similarity::{
    adjusted_corr, combined_sim, cumulative_distance, pearson, score, shape_sim, SimilarityConfig,
    SimilarityScore, Variant,
};
