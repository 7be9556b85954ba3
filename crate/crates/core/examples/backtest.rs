//! Monthly top-N trading on predicted returns, compounding from 1000.

use cbrq::backtest::predict_by_month;
use cbrq::synthetic::{regime_dataset, RegimeSpec};
use cbrq::{build_case_base, run_backtest, BacktestConfig, SimilarityConfig, Variant};

fn main() -> cbrq::Result<()> {
    let spec = RegimeSpec {
        months: 120,
        ..Default::default()
    };
    let base = build_case_base(&regime_dataset(&spec, 4), 12)?;
    let cfg = BacktestConfig::default();
    for v in [Variant::ProposedAdjusted, Variant::PearsonOnly, Variant::CumulativeOnly] {
        let table = predict_by_month(&base, &SimilarityConfig::of(v), &cfg)?;
        let r = run_backtest(&table, &cfg)?;
        println!(
            "{:<18} {} months, {:>4} trades, {:>12.2} final, {:+.1}% p.a., vol {:.1}%",
            v.as_str(),
            r.months.len(),
            r.trade_count,
            r.accumulated_value,
            r.annualised_return * 100.0,
            r.annualised_volatility.unwrap_or(f64::NAN) * 100.0
        );
    }
    Ok(())
}
